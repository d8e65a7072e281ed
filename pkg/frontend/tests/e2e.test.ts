// Scripted session against the real backend: spawns the Python service,
// drives a complete 3-generation session through the same grid code the
// browser uses (DOM via happy-dom, WebGL stubbed), then replays the
// downloaded log server-side.

import { execFile, spawn, type ChildProcess } from 'node:child_process';
import { mkdtemp, writeFile } from 'node:fs/promises';
import { tmpdir } from 'node:os';
import * as path from 'node:path';
import { fileURLToPath } from 'node:url';
import { promisify } from 'node:util';

import { Window } from 'happy-dom';
import type * as THREE from 'three';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiError, SessionApi } from '../src/api';
import type { CardViewer } from '../src/cards';
import { renderGrid } from '../src/cards';
import { DisplayShuffle, SelectionState } from '../src/state';

const run = promisify(execFile);

const PKG_ROOT = path.resolve(path.dirname(fileURLToPath(import.meta.url)), '../..');
const PORT = 18100 + Math.floor(Math.random() * 800);
const BASE = `http://127.0.0.1:${PORT}`;

// frozen reference for the default rig's neutral mesh (weights all zero)
const NEUTRAL_VERTEX_COUNT = 489;
const NEUTRAL_COORDINATE_SUM = 598.1827731588426;
const NEUTRAL_FIRST_VERTEX = [-4.5, -0.46124999999999994, -5.0];

let server: ChildProcess;
const api = new SessionApi(BASE);

const stubViewer = (): CardViewer => ({ dispose: () => {} });

async function waitForServer(): Promise<void> {
    const deadline = Date.now() + 45000;
    for (;;) {
        try {
            await api.listRigs();
            return;
        } catch {
            if (Date.now() > deadline) {
                throw new Error(`service at ${BASE} did not come up`);
            }
            await new Promise((r) => setTimeout(r, 200));
        }
    }
}

beforeAll(async () => {
    server = spawn('python3', ['-m', 'emogen.cli', 'serve', '--port', String(PORT)],
                   { cwd: PKG_ROOT, stdio: 'ignore' });
    const dom = new Window({ url: BASE });
    (globalThis as Record<string, unknown>).document = dom.document;
    await waitForServer();
});

afterAll(() => {
    server?.kill();
});

describe('session service', () => {
    let sessionId = '';
    let weightsLen = 0;
    let finalEliteJson = '';

    it('lists the built-in rig', async () => {
        const rigs = await api.listRigs();
        expect(rigs).toContain('default');
    });

    it('drives a full 3-generation session through the grid', async () => {
        const handle = await api.createSession(
            { generations: 3, seed: 11, bounds: [1, 10] });
        sessionId = handle.session_id;
        expect(handle.generation).toBe(0);
        expect(handle.state).toBe('awaiting-selection');

        const shuffle = new DisplayShuffle();
        const grid = document.createElement('div');
        let lastEliteWeights = '';
        let lastEliteVertices = '';

        for (let gen = 0; gen <= 3; gen++) {
            const pop = await api.population(sessionId);
            expect(pop.generation).toBe(gen);
            weightsLen = pop.faces[0].weights.length;

            if (gen > 0) {
                // elitism through the wire: face 1 of the new grid is the
                // submitted elite, weights and evaluated mesh bit-exact
                expect(JSON.stringify(pop.faces[0].weights)).toBe(lastEliteWeights);
                expect(JSON.stringify(pop.faces[0].vertices)).toBe(lastEliteVertices);
                expect(pop.faces[0].tag).toBe('elite-carry');
            }

            const selection = new SelectionState(pop.faces.length, pop.bounds);
            const order = shuffle.next(pop.generation, pop.faces.length);
            renderGrid(grid, pop, selection, order, stubViewer);
            const cards = grid.querySelectorAll<HTMLElement>('.face-card');
            expect(cards).toHaveLength(10);

            // pick slot 2 as elite plus two keeps, through the DOM
            const button = (slot: number, cls: string) =>
                grid.querySelector<HTMLButtonElement>(`[data-slot="${slot}"] ${cls}`)!;
            button(2, '.elite-btn').click();
            button(4, '.keep-btn').click();
            button(7, '.keep-btn').click();
            expect(selection.validate()).toBeNull();
            const payload = selection.payload(pop.generation);
            expect(payload).toEqual({ generation: gen, elite: 2, others: [4, 7] });

            lastEliteWeights = JSON.stringify(pop.faces[2].weights);
            lastEliteVertices = JSON.stringify(pop.faces[2].vertices);

            const after = await api.submit(
                sessionId, payload.generation, payload.elite, payload.others);
            if (gen < 3) {
                expect(after.generation).toBe(gen + 1);
                expect(after.state).toBe('awaiting-selection');
            } else {
                expect(after.state).toBe('finished');
                expect(after.log_ref).toBe(`/sessions/${sessionId}/log`);
                expect(JSON.stringify(after.final_elite)).toBe(lastEliteWeights);
                finalEliteJson = lastEliteWeights;
            }
        }
        expect(shuffle.log.map((e) => e.generation)).toEqual([0, 1, 2, 3]);
    }, 120000);

    it('rejects further interaction once finished', async () => {
        await expect(api.population(sessionId)).rejects.toMatchObject(
            { name: 'ApiError', status: 409 });
        await expect(api.submit(sessionId, 4, 0, [])).rejects.toMatchObject(
            { status: 409 });
    });

    it('surfaces invalid selections as ApiError', async () => {
        const h = await api.createSession({ generations: 2, seed: 3, bounds: [1, 3] });
        await expect(api.submit(h.session_id, 0, 1, [1]))
            .rejects.toMatchObject({ status: 422 });
        await expect(api.submit(h.session_id, 5, 1, []))
            .rejects.toMatchObject({ status: 409 });
        const bad = await api.submit(h.session_id, 0, 1, [2, 3, 4])
            .catch((e: ApiError) => e);
        expect(bad).toBeInstanceOf(ApiError);
        expect((bad as ApiError).message).toMatch(/outside bounds/);
    });

    it('downloaded log replays server-side', async () => {
        const doc = await api.log(sessionId);
        expect(doc.schema).toBe('sessionlog/1');
        const dir = await mkdtemp(path.join(tmpdir(), 'emogen-ui-'));
        const logPath = path.join(dir, 'session.json');
        await writeFile(logPath, JSON.stringify(doc), 'utf8');
        const { stdout } = await run(
            'python3', ['-m', 'emogen.cli', 'replay', '--log', logPath],
            { cwd: PKG_ROOT });
        expect(stdout).toMatch(/matches/);
        const final = (doc as { final_elite?: number[] }).final_elite;
        expect(JSON.stringify(final)).toBe(finalEliteJson);
    }, 120000);

    it('renders the neutral member identical to the reference snapshot', async () => {
        const zeros = Array.from({ length: 10 }, () => new Array(weightsLen).fill(0));
        const h = await api.createSession({ generations: 1, fixedMembers: zeros });
        const pop = await api.population(h.session_id);
        const verts = pop.faces[0].vertices;
        expect(verts).toHaveLength(NEUTRAL_VERTEX_COUNT);
        expect(verts[0]).toEqual(NEUTRAL_FIRST_VERTEX);
        let sum = 0.0;
        for (const v of verts) {
            sum += v[0];
            sum += v[1];
            sum += v[2];
        }
        expect(sum).toBe(NEUTRAL_COORDINATE_SUM);
        for (const face of pop.faces) {
            expect(face.vertices).toEqual(verts);
        }

        const grid = document.createElement('div');
        const captured: THREE.BufferGeometry[] = [];
        renderGrid(grid, pop, new SelectionState(10, pop.bounds),
                   [...Array(10).keys()], (_c, g) => {
                       captured.push(g);
                       return { dispose: () => {} };
                   });
        const pos = captured[0].getAttribute('position');
        verts.forEach((v, j) => {
            expect(pos.getX(j)).toBe(Math.fround(v[0]));
            expect(pos.getY(j)).toBe(Math.fround(v[1]));
            expect(pos.getZ(j)).toBe(Math.fround(v[2]));
        });
    }, 120000);
});
