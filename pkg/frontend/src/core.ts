/**
 * Pure logic shared by the worker and admin pages: microtask/session
 * shapes as served by the session service, slider/preview arithmetic,
 * and progress formatting. No DOM access here.
 */

export interface Slot {
    kind: 'target' | 'check';
    reversed: boolean;
    preview_path: string;
    session_id?: string;
    step?: number;
    s?: number;
    l?: number;
}

export interface Microtask {
    microtask_id: string;
    worker: string;
    slots: Slot[];
}

export interface SessionProgress {
    session_id: string;
    status: string;
    total_steps: number;
    n_sliders: number;
    n_key_pixels: number;
    width: number;
    height: number;
    responses_per_slider: number;
    s: number | null;
    l: number | null;
    step: number;
    accepted_responses: number;
}

export interface Submission {
    worker: string;
    microtask_id: string;
    alphas: number[];
}

// sliders move in whole ticks on [0, 1000]; alpha = ticks / 1000
export const SLIDER_MAX = 1000;
export const PREVIEW_MAX_EDGE = 512;

export function sliderToAlpha(position: number): number {
    if (position < 0 || position > SLIDER_MAX) {
        throw new Error(`slider position ${position} out of range`);
    }
    return position / SLIDER_MAX;
}

// raw position goes straight into the query; the server alone undoes the
// reversal it assigned, the client never sends effective alphas
export function previewUrl(slot: Slot, alpha: number, maxEdge = PREVIEW_MAX_EDGE): string {
    return `${slot.preview_path}?alpha=${alpha}&reversed=${slot.reversed}&max_edge=${maxEdge}`;
}

export function submission(worker: string, microtaskId: string, alphas: number[]): Submission {
    return { worker, microtask_id: microtaskId, alphas };
}

export function allTouched(touched: boolean[]): boolean {
    return touched.length > 0 && touched.every((t) => t);
}

// 1-based step number of round s, key pixel l, with L key pixels per round
export function stepNumber(s: number, l: number, L: number): number {
    return (s - 1) * L + l;
}

export function progressLabel(p: SessionProgress): string {
    if (p.s === null || p.l === null) {
        return `${p.total_steps}/${p.total_steps} steps`;
    }
    return `${stepNumber(p.s, p.l, p.n_key_pixels)}/${p.total_steps} steps`;
}

export function responsesLabel(p: SessionProgress): string {
    return `${p.accepted_responses}/${p.responses_per_slider} responses`;
}

// trailing-edge debounce; previews must not fire faster than the wait
export function debounce<A extends unknown[]>(
    fn: (...args: A) => void,
    waitMs: number,
): (...args: A) => void {
    let timer: ReturnType<typeof setTimeout> | undefined;
    return (...args: A) => {
        if (timer !== undefined) {
            clearTimeout(timer);
        }
        timer = setTimeout(() => {
            timer = undefined;
            fn(...args);
        }, waitMs);
    };
}

interface TokenStore {
    getItem(key: string): string | null;
    setItem(key: string, value: string): void;
}

// one random token per browser, minted on first visit
export function workerToken(store: TokenStore, key = 'localenhance_worker'): string {
    let token = store.getItem(key);
    if (!token) {
        token = 'w' + Math.random().toString(36).slice(2, 10);
        store.setItem(key, token);
    }
    return token;
}
