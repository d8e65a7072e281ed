// App shell: session setup form, the per-generation selection loop, and
// the final screen with the evolved elite plus log downloads. The grid
// locks while the server advances; selections are validated client-side
// before any POST.

import { ApiError, SessionApi } from './api';
import type { PopulationPayload, SessionHandle } from './api';
import type { CardViewer } from './cards';
import { clearError, renderGrid, showError } from './cards';
import { faceGeometry, sharedIndex } from './geometry';
import { DisplayShuffle, SelectionState } from './state';
import { CameraBus, makeWebGLViewer } from './viewer';

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
}

function apiBase(): string {
    return new URLSearchParams(location.search).get('api') ?? 'http://127.0.0.1:8321';
}

class App {
    readonly api = new SessionApi(apiBase());
    readonly bus = new CameraBus();
    shuffle = new DisplayShuffle();
    session: SessionHandle | null = null;
    selection: SelectionState | null = null;
    population: PopulationPayload | null = null;
    viewers: CardViewer[] = [];
    busy = false;

    banner = el<HTMLElement>('banner');
    setup = el<HTMLElement>('setup');
    loop = el<HTMLElement>('loop');
    final = el<HTMLElement>('final');
    grid = el<HTMLElement>('grid');
    status = el<HTMLElement>('status');
    submitBtn = el<HTMLButtonElement>('submit');

    async start(): Promise<void> {
        const generations = Number(el<HTMLInputElement>('generations').value);
        const lo = Number(el<HTMLInputElement>('lo').value);
        const hi = Number(el<HTMLInputElement>('hi').value);
        const rig = el<HTMLSelectElement>('rig').value;
        const seedRaw = el<HTMLInputElement>('seed').value.trim();
        try {
            this.session = await this.api.createSession({
                rig,
                generations,
                bounds: [lo, hi],
                seed: seedRaw === '' ? undefined : Number(seedRaw),
            });
        } catch (err) {
            showError(this.banner, String(err instanceof Error ? err.message : err));
            return;
        }
        clearError(this.banner);
        this.shuffle = new DisplayShuffle();
        this.setup.classList.add('hidden');
        this.final.classList.add('hidden');
        this.loop.classList.remove('hidden');
        await this.refresh();
    }

    async refresh(): Promise<void> {
        if (!this.session) return;
        let pop: PopulationPayload;
        try {
            pop = await this.api.population(this.session.session_id);
        } catch (err) {
            showError(this.banner, String(err instanceof Error ? err.message : err));
            return;
        }
        this.population = pop;
        this.selection = new SelectionState(pop.faces.length, pop.bounds);
        const order = this.shuffle.next(pop.generation, pop.faces.length);
        this.viewers.forEach((v) => v.dispose());
        try {
            this.viewers = renderGrid(this.grid, pop, this.selection, order,
                                      makeWebGLViewer(this.bus));
        } catch (err) {
            this.viewers = [];
            this.grid.replaceChildren();
            showError(this.banner, String(err instanceof Error ? err.message : err));
            return;
        }
        clearError(this.banner);
        this.status.textContent =
            `generation ${pop.generation} of ${this.session.generations}; ` +
            `pick 1 elite, ${pop.bounds[0]}-${pop.bounds[1]} faces total`;
    }

    async submit(): Promise<void> {
        if (!this.session || !this.selection || !this.population || this.busy) return;
        const reason = this.selection.validate();
        if (reason) {
            showError(this.banner, reason);
            return;
        }
        const payload = this.selection.payload(this.population.generation);
        this.lock(true);
        try {
            const handle = await this.api.submit(
                this.session.session_id, payload.generation, payload.elite, payload.others);
            this.session = handle;
            clearError(this.banner);
            if (handle.state === 'finished') {
                this.showFinal(payload.elite);
            } else {
                await this.refresh();
            }
        } catch (err) {
            if (err instanceof ApiError) {
                showError(this.banner, err.message);
                if (err.status === 409) {
                    await this.refresh();  // stale generation: resync, selections redone
                }
            } else {
                showError(this.banner, String(err));
            }
        } finally {
            this.lock(false);
        }
    }

    lock(busy: boolean): void {
        this.busy = busy;
        this.submitBtn.disabled = busy;
        this.grid.classList.toggle('locked', busy);
    }

    showFinal(eliteSlot: number): void {
        if (!this.session || !this.population) return;
        this.loop.classList.add('hidden');
        this.final.classList.remove('hidden');
        const index = sharedIndex(this.population.topology);
        const geometry = faceGeometry(this.population.faces[eliteSlot], index);
        const canvas = el<HTMLCanvasElement>('final-canvas');
        makeWebGLViewer(this.bus)(canvas, geometry, eliteSlot);

        const logLink = el<HTMLAnchorElement>('log-link');
        logLink.href = this.api.logUrl(this.session.session_id);
        logLink.download = `session-${this.session.session_id}.json`;
        const orderLink = el<HTMLAnchorElement>('order-link');
        orderLink.href = URL.createObjectURL(
            new Blob([this.shuffle.blob()], { type: 'application/json' }));
        orderLink.download = `display-order-${this.session.session_id}.json`;
    }
}

async function boot(): Promise<void> {
    const app = new App();
    el<HTMLButtonElement>('start').addEventListener('click', () => void app.start());
    app.submitBtn.addEventListener('click', () => void app.submit());
    el<HTMLInputElement>('sync').addEventListener('change', (e) => {
        app.bus.enabled = (e.target as HTMLInputElement).checked;
    });
    el<HTMLButtonElement>('restart').addEventListener('click', () => {
        location.reload();
    });
    try {
        const rigs = await app.api.listRigs();
        const select = el<HTMLSelectElement>('rig');
        select.replaceChildren(...rigs.map((r) => new Option(r, r)));
        select.value = rigs.includes('default') ? 'default' : rigs[0];
    } catch (err) {
        showError(app.banner,
                  `cannot reach the session service at ${app.api.baseUrl}: ` +
                  `${err instanceof Error ? err.message : err}`);
    }
}

void boot();
