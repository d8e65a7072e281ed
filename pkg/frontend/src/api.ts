// Typed client for the evolution session service. Every backend access in
// the app goes through this module; the UI never reads files or touches
// weights directly.

export interface FacePayload {
    index: number;
    weights: number[];
    vertices: number[][];
    tag: string;
    corrected: boolean;
    resolved: boolean;
}

export interface PopulationPayload {
    session_id: string;
    generation: number;
    state: string;
    bounds: [number, number];
    topology: { faces: number[][] };
    faces: FacePayload[];
}

export interface SessionHandle {
    session_id: string;
    state: string;
    generation: number;
    generations: number;
    bounds: [number, number];
    rig_id: string;
    final_elite?: number[];
    log_ref?: string;
}

export interface CreateOptions {
    rig?: string;
    generations?: number;
    seed?: number;
    bounds?: [number, number];
    fixedMembers?: number[][];
}

export class ApiError extends Error {
    constructor(readonly status: number, detail: string) {
        super(detail);
        this.name = 'ApiError';
    }
}

async function unwrap<T>(res: Response): Promise<T> {
    if (res.ok) {
        return res.json() as Promise<T>;
    }
    let detail = `request failed with status ${res.status}`;
    try {
        const body = await res.json();
        if (body && typeof body.detail === 'string') {
            detail = body.detail;
        }
    } catch {
        // non-JSON error body, keep the generic message
    }
    throw new ApiError(res.status, detail);
}

export class SessionApi {
    constructor(readonly baseUrl: string) {}

    async listRigs(): Promise<string[]> {
        const res = await fetch(`${this.baseUrl}/rigs`);
        const body = await unwrap<{ rigs: string[] }>(res);
        return body.rigs;
    }

    async createSession(opts: CreateOptions = {}): Promise<SessionHandle> {
        const payload: Record<string, unknown> = {};
        if (opts.rig !== undefined) payload.rig = opts.rig;
        const ga: Record<string, unknown> = {};
        if (opts.generations !== undefined) ga.generations = opts.generations;
        if (opts.seed !== undefined) ga.seed = opts.seed;
        if (opts.fixedMembers !== undefined) {
            ga.init_mode = 'fixed';
            payload.fixed_members = opts.fixedMembers;
        }
        if (Object.keys(ga).length > 0) payload.ga = ga;
        if (opts.bounds !== undefined) payload.selection_bounds = opts.bounds;
        const res = await fetch(`${this.baseUrl}/sessions`, {
            method: 'POST',
            headers: { 'Content-Type': 'application/json' },
            body: JSON.stringify(payload),
        });
        return unwrap<SessionHandle>(res);
    }

    async population(sessionId: string): Promise<PopulationPayload> {
        const res = await fetch(`${this.baseUrl}/sessions/${sessionId}/population`);
        return unwrap<PopulationPayload>(res);
    }

    async submit(sessionId: string, generation: number, elite: number,
                 others: number[]): Promise<SessionHandle> {
        const res = await fetch(`${this.baseUrl}/sessions/${sessionId}/selection`, {
            method: 'POST',
            headers: { 'Content-Type': 'application/json' },
            body: JSON.stringify({ generation, elite, others }),
        });
        return unwrap<SessionHandle>(res);
    }

    logUrl(sessionId: string): string {
        return `${this.baseUrl}/sessions/${sessionId}/log`;
    }

    async log(sessionId: string): Promise<Record<string, unknown>> {
        const res = await fetch(this.logUrl(sessionId));
        return unwrap<Record<string, unknown>>(res);
    }
}
