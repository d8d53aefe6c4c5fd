/**
 * Worker microtask page: one image+slider row per assigned slot.
 * Dragging a slider swaps in a debounced server-rendered preview; Submit
 * unlocks once every slider has been touched and posts the raw positions
 * in a single request.
 */

import {
    Microtask,
    Slot,
    allTouched,
    debounce,
    previewUrl,
    sliderToAlpha,
    submission,
    workerToken,
    SLIDER_MAX,
} from './core.js';

export const INSTRUCTION =
    'Please adjust the photo retouching parameters for the best results';
export const WARNING =
    'If the parameters are adjusted randomly, the reward may not be paid.';
export const DEBOUNCE_MS = 120; // previews fire at most once per 120 ms

type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

export interface WorkerPage {
    loadTask(): Promise<void>;
}

export function initWorkerPage(
    root: HTMLElement,
    base = '',
    fetchFn?: FetchFn,
): WorkerPage {
    const doc = root.ownerDocument;
    const doFetch: FetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
    const token = workerToken(doc.defaultView!.localStorage);

    const el = <K extends keyof HTMLElementTagNameMap>(tag: K, cls: string) => {
        const node = doc.createElement(tag);
        node.className = cls;
        return node;
    };

    const instruction = el('p', 'instruction');
    instruction.textContent = INSTRUCTION;
    const warning = el('p', 'warning');
    warning.textContent = WARNING;
    const status = el('p', 'status');
    const notice = el('p', 'notice'); // outcome of the last submission
    const rows = el('div', 'rows');
    const submitBtn = el('button', 'submit');
    submitBtn.textContent = 'Submit';
    submitBtn.disabled = true;
    root.replaceChildren(instruction, warning, status, notice, rows, submitBtn);

    // in-progress state; nothing but the token survives a submission
    let task: Microtask | null = null;
    let positions: number[] = [];
    let touched: boolean[] = [];

    const updateSubmit = () => {
        submitBtn.disabled = task === null || !allTouched(touched);
    };

    const addRow = (slot: Slot, index: number) => {
        const row = el('div', 'row');
        const img = doc.createElement('img');
        img.src = previewUrl(slot, sliderToAlpha(positions[index]));
        const slider = doc.createElement('input');
        slider.type = 'range';
        slider.min = '0';
        slider.max = String(SLIDER_MAX);
        slider.step = '1';
        slider.value = String(positions[index]);
        const updatePreview = debounce(() => {
            img.src = previewUrl(slot, sliderToAlpha(positions[index]));
        }, DEBOUNCE_MS);
        slider.addEventListener('input', () => {
            positions[index] = Number(slider.value);
            touched[index] = true;
            updatePreview();
            updateSubmit();
        });
        row.appendChild(img);
        row.appendChild(slider);
        rows.appendChild(row);
    };

    const render = (next: Microtask) => {
        task = next;
        positions = next.slots.map(() => SLIDER_MAX / 2);
        touched = next.slots.map(() => false);
        rows.replaceChildren();
        next.slots.forEach(addRow);
        status.textContent = `${next.slots.length} sliders to adjust`;
        updateSubmit();
    };

    const clear = (message: string) => {
        task = null;
        positions = [];
        touched = [];
        rows.replaceChildren();
        status.textContent = message;
        updateSubmit();
    };

    const loadTask = async () => {
        let res: Response;
        try {
            res = await doFetch(`${base}/microtask?worker=${token}`);
        } catch {
            clear('network error while fetching work; reload to retry');
            return;
        }
        if (res.status === 404) {
            clear('no work available');
            return;
        }
        if (!res.ok) {
            clear(`service error (${res.status})`);
            return;
        }
        render((await res.json()) as Microtask);
    };

    submitBtn.addEventListener('click', async () => {
        if (task === null) {
            return;
        }
        submitBtn.disabled = true;
        const body = submission(token, task.microtask_id, positions.map(sliderToAlpha));
        let res: Response;
        try {
            res = await doFetch(`${base}/responses`, {
                method: 'POST',
                headers: { 'Content-Type': 'application/json' },
                body: JSON.stringify(body),
            });
        } catch {
            // keep every slider where the worker left it and let them retry
            notice.textContent = 'network error; press Submit to retry';
            updateSubmit();
            return;
        }
        if (res.ok) {
            const verdict = (await res.json()) as { status: string };
            notice.textContent = verdict.status === 'accepted'
                ? 'submission accepted, thank you'
                : 'submission rejected by the quality check';
        } else {
            notice.textContent = `submission refused (${res.status})`;
        }
        await loadTask();
    });

    void loadTask();
    return { loadTask };
}
