// Mesh assembly for the card viewers: one index buffer shared by all ten
// faces of a population, per-face position attributes, normals computed
// client-side. The payload arrays are read, never written.

import * as THREE from 'three';

import type { FacePayload, PopulationPayload } from './api';

export class PayloadError extends Error {
    constructor(message: string) {
        super(message);
        this.name = 'PayloadError';
    }
}

export function sharedIndex(topology: { faces: number[][] }): THREE.BufferAttribute {
    const flat = new Uint32Array(topology.faces.length * 3);
    topology.faces.forEach((f, i) => {
        flat[3 * i] = f[0];
        flat[3 * i + 1] = f[1];
        flat[3 * i + 2] = f[2];
    });
    return new THREE.BufferAttribute(flat, 1);
}

export function faceGeometry(face: FacePayload,
                             index: THREE.BufferAttribute): THREE.BufferGeometry {
    const pos = new Float32Array(face.vertices.length * 3);
    face.vertices.forEach((v, i) => {
        pos[3 * i] = v[0];
        pos[3 * i + 1] = v[1];
        pos[3 * i + 2] = v[2];
    });
    const geo = new THREE.BufferGeometry();
    geo.setIndex(index);
    geo.setAttribute('position', new THREE.BufferAttribute(pos, 3));
    geo.computeVertexNormals();
    return geo;
}

function checkPayload(pop: PopulationPayload): void {
    const tri = pop?.topology?.faces;
    if (!Array.isArray(tri) || tri.length === 0 ||
            tri.some((f) => !Array.isArray(f) || f.length !== 3)) {
        throw new PayloadError('malformed population payload: bad topology');
    }
    if (!Array.isArray(pop.faces) || pop.faces.length === 0) {
        throw new PayloadError('malformed population payload: no faces');
    }
    const nVerts = pop.faces[0]?.vertices?.length;
    for (const face of pop.faces) {
        const verts = face?.vertices;
        if (!Array.isArray(verts) || verts.length !== nVerts ||
                verts.some((v) => !Array.isArray(v) || v.length !== 3)) {
            throw new PayloadError(
                `malformed population payload: bad vertices for face ${face?.index}`);
        }
    }
    for (const f of tri) {
        if (f[0] >= nVerts || f[1] >= nVerts || f[2] >= nVerts) {
            throw new PayloadError('malformed population payload: index out of range');
        }
    }
}

// all-or-nothing: a malformed payload throws before any geometry is built,
// so the caller never shows a partial grid
export function populationGeometries(pop: PopulationPayload): THREE.BufferGeometry[] {
    checkPayload(pop);
    const index = sharedIndex(pop.topology);
    return pop.faces.map((f) => faceGeometry(f, index));
}
