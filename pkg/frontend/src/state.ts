// Grid-side session state: per-card selection with a single elite, and the
// randomized display order used each generation. Slot indices (the server's
// member positions) are what selections carry; display positions never
// leak into submissions.

export type CardState = 'none' | 'selected' | 'elite';

export class SelectionState {
    private states: CardState[];

    constructor(readonly size: number, readonly bounds: [number, number]) {
        this.states = new Array<CardState>(size).fill('none');
    }

    stateOf(slot: number): CardState {
        return this.states[slot];
    }

    get elite(): number | null {
        const i = this.states.indexOf('elite');
        return i === -1 ? null : i;
    }

    get others(): number[] {
        const out: number[] = [];
        this.states.forEach((s, i) => {
            if (s === 'selected') out.push(i);
        });
        return out;
    }

    // exactly one elite across cards; promoting a card demotes the old elite
    setElite(slot: number): void {
        const prev = this.elite;
        if (prev !== null && prev !== slot) {
            this.states[prev] = 'none';
        }
        this.states[slot] = 'elite';
    }

    // the elite card cannot also be an additional pick; returns whether the
    // toggle was applied
    toggleSelected(slot: number): boolean {
        if (this.states[slot] === 'elite') {
            return false;
        }
        this.states[slot] = this.states[slot] === 'selected' ? 'none' : 'selected';
        return true;
    }

    // null when submittable, otherwise a user-facing reason
    validate(): string | null {
        if (this.elite === null) {
            return 'mark one face as the elite first';
        }
        const count = 1 + this.others.length;
        const [lo, hi] = this.bounds;
        if (count < lo || count > hi) {
            return `selection count ${count} outside bounds [${lo}, ${hi}]`;
        }
        return null;
    }

    payload(generation: number): { generation: number; elite: number; others: number[] } {
        const elite = this.elite;
        if (elite === null) {
            throw new Error('cannot build a selection payload without an elite');
        }
        return { generation, elite, others: this.others };
    }
}

export interface ShuffleEntry {
    generation: number;
    order: number[];
}

// Fisher-Yates order per generation, recorded so a session's on-screen
// layout can be audited afterwards.
export class DisplayShuffle {
    readonly log: ShuffleEntry[] = [];

    constructor(private random: () => number = Math.random) {}

    next(generation: number, size: number): number[] {
        const order = Array.from({ length: size }, (_, i) => i);
        for (let i = size - 1; i > 0; i--) {
            const j = Math.floor(this.random() * (i + 1));
            [order[i], order[j]] = [order[j], order[i]];
        }
        this.log.push({ generation, order: [...order] });
        return order;
    }

    blob(): string {
        return JSON.stringify({ display_order: this.log }, null, 1);
    }
}
