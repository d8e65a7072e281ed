// Synthetic population payloads: a tetrahedron per face, enough structure
// to exercise grid and geometry logic without a running service.

import type { FacePayload, PopulationPayload } from '../src/api';

export function makePayload(nFaces = 10): PopulationPayload {
    const faces: FacePayload[] = [];
    for (let i = 0; i < nFaces; i++) {
        const dz = i * 0.01;
        faces.push({
            index: i,
            weights: Array.from({ length: 6 }, (_, k) => (i + k) * 0.05),
            vertices: [
                [0, 0, dz],
                [1, 0, dz],
                [0, 1, dz],
                [0, 0, 1 + dz],
            ],
            tag: i === 0 ? 'elite-carry' : 'child',
            corrected: i % 3 === 0,
            resolved: i % 5 !== 4,
        });
    }
    return {
        session_id: 'local',
        generation: 0,
        state: 'awaiting-selection',
        bounds: [1, 10],
        topology: { faces: [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]] },
        faces,
    };
}

// deterministic stand-in for Math.random
export function lcg(seed: number): () => number {
    let s = seed >>> 0;
    return () => {
        s = (s * 1664525 + 1013904223) >>> 0;
        return s / 2 ** 32;
    };
}
