// Per-card three.js viewer: identical camera and lighting across cards,
// orbit on drag, wheel zoom. A shared CameraBus keeps every card at the
// same viewpoint when sync is on, which is what side-by-side expression
// comparison needs.

import * as THREE from 'three';

import type { CardViewer, ViewerFactory } from './cards';

export interface Pose {
    theta: number;
    phi: number;
    zoom: number;
}

const HOME: Pose = { theta: 0.0, phi: 1.25, zoom: 1.0 };
const PHI_MIN = 0.15;
const PHI_MAX = Math.PI - 0.15;

export class CameraBus {
    enabled = false;
    readonly pose: Pose = { ...HOME };
    private listeners = new Set<() => void>();

    onChange(fn: () => void): () => void {
        this.listeners.add(fn);
        return () => this.listeners.delete(fn);
    }

    set(pose: Pose): void {
        Object.assign(this.pose, pose);
        this.listeners.forEach((fn) => fn());
    }
}

function clampPhi(phi: number): number {
    return Math.min(PHI_MAX, Math.max(PHI_MIN, phi));
}

export function makeWebGLViewer(bus: CameraBus): ViewerFactory {
    return (canvas, geometry, _slot): CardViewer => {
        const scene = new THREE.Scene();
        scene.background = new THREE.Color(0x20242b);
        scene.add(new THREE.AmbientLight(0xffffff, 0.45));
        const key = new THREE.DirectionalLight(0xffffff, 0.9);
        key.position.set(1.5, 2.0, 2.5);
        scene.add(key);

        const material = new THREE.MeshStandardMaterial({ color: 0xb9c4d0 });
        scene.add(new THREE.Mesh(geometry, material));

        geometry.computeBoundingSphere();
        const sphere = geometry.boundingSphere as THREE.Sphere;
        const camera = new THREE.PerspectiveCamera(
            40, canvas.width / canvas.height, sphere.radius * 0.05, sphere.radius * 40);

        const renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
        renderer.setSize(canvas.width, canvas.height, false);

        const local: Pose = { ...HOME };
        const pose = () => (bus.enabled ? bus.pose : local);

        const render = () => {
            const p = pose();
            const dist = (sphere.radius * 2.8) / p.zoom;
            camera.position.setFromSphericalCoords(dist, p.phi, p.theta)
                .add(sphere.center);
            camera.lookAt(sphere.center);
            renderer.render(scene, camera);
        };

        let dragging = false;
        canvas.addEventListener('pointerdown', (e) => {
            dragging = true;
            canvas.setPointerCapture(e.pointerId);
        });
        canvas.addEventListener('pointerup', () => {
            dragging = false;
        });
        canvas.addEventListener('pointermove', (e) => {
            if (!dragging) return;
            const p = pose();
            const next: Pose = {
                theta: p.theta - e.movementX * 0.01,
                phi: clampPhi(p.phi - e.movementY * 0.01),
                zoom: p.zoom,
            };
            if (bus.enabled) {
                bus.set(next);
            } else {
                Object.assign(local, next);
                render();
            }
        });
        canvas.addEventListener('wheel', (e) => {
            e.preventDefault();
            const p = pose();
            const zoom = Math.min(8, Math.max(0.3, p.zoom * (e.deltaY < 0 ? 1.1 : 0.9)));
            if (bus.enabled) {
                bus.set({ ...p, zoom });
            } else {
                local.zoom = zoom;
                render();
            }
        });

        const unsubscribe = bus.onChange(render);
        render();
        return {
            dispose() {
                unsubscribe();
                renderer.dispose();
                geometry.dispose();
                material.dispose();
            },
        };
    };
}
