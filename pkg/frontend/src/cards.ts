// DOM for the selection grid. Card rendering is delegated to a viewer
// factory so grid logic stays testable without a WebGL context; the real
// factory lives in viewer.ts.

import type * as THREE from 'three';

import type { PopulationPayload } from './api';
import { populationGeometries } from './geometry';
import type { SelectionState } from './state';

export interface CardViewer {
    dispose(): void;
}

export type ViewerFactory = (canvas: HTMLCanvasElement,
                             geometry: THREE.BufferGeometry,
                             slot: number) => CardViewer;

export function showError(banner: HTMLElement, message: string): void {
    banner.textContent = message;
    banner.classList.remove('hidden');
}

export function clearError(banner: HTMLElement): void {
    banner.textContent = '';
    banner.classList.add('hidden');
}

function applyStates(grid: HTMLElement, selection: SelectionState): void {
    grid.querySelectorAll<HTMLElement>('.face-card').forEach((card) => {
        const slot = Number(card.dataset.slot);
        card.classList.toggle('elite', selection.stateOf(slot) === 'elite');
        card.classList.toggle('selected', selection.stateOf(slot) === 'selected');
    });
}

// builds all geometry before touching the DOM; a malformed payload throws
// and leaves the grid untouched
export function renderGrid(grid: HTMLElement, pop: PopulationPayload,
                           selection: SelectionState, order: number[],
                           makeViewer: ViewerFactory): CardViewer[] {
    const geometries = populationGeometries(pop);
    grid.replaceChildren();
    const viewers: CardViewer[] = [];
    for (const slot of order) {
        const face = pop.faces[slot];
        const card = document.createElement('div');
        card.className = 'face-card';
        card.dataset.slot = String(slot);

        const head = document.createElement('div');
        head.className = 'card-head';
        head.textContent = `#${slot} ${face.tag}`;
        if (face.corrected) {
            const badge = document.createElement('span');
            badge.className = face.resolved ? 'badge' : 'badge warn';
            badge.textContent = face.resolved ? 'fixed' : 'unresolved';
            head.appendChild(badge);
        }
        card.appendChild(head);

        const canvas = document.createElement('canvas');
        canvas.width = 220;
        canvas.height = 180;
        card.appendChild(canvas);

        const actions = document.createElement('div');
        actions.className = 'card-actions';
        const eliteBtn = document.createElement('button');
        eliteBtn.className = 'elite-btn';
        eliteBtn.textContent = 'elite';
        eliteBtn.addEventListener('click', () => {
            selection.setElite(slot);
            applyStates(grid, selection);
        });
        const keepBtn = document.createElement('button');
        keepBtn.className = 'keep-btn';
        keepBtn.textContent = 'keep';
        keepBtn.addEventListener('click', () => {
            selection.toggleSelected(slot);
            applyStates(grid, selection);
        });
        actions.append(eliteBtn, keepBtn);
        card.appendChild(actions);

        grid.appendChild(card);
        viewers.push(makeViewer(canvas, geometries[slot], slot));
    }
    applyStates(grid, selection);
    return viewers;
}
