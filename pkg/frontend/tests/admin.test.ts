// @vitest-environment jsdom
import { beforeEach, describe, expect, it, vi } from 'vitest';

import { SessionProgress } from '../src/core.js';
import { POLL_MS, initAdminPage, renderSessions } from '../src/admin.js';

const session = (over: Partial<SessionProgress>): SessionProgress => ({
    session_id: 's000001',
    status: 'collecting',
    total_steps: 16,
    n_sliders: 4,
    n_key_pixels: 4,
    width: 64,
    height: 48,
    responses_per_slider: 7,
    s: 2,
    l: 3,
    step: 7,
    accepted_responses: 4,
    ...over,
});

const stub = (status: number, payload: unknown): Response =>
    ({ ok: status < 400, status, json: async () => payload }) as unknown as Response;

let root: HTMLElement;

beforeEach(() => {
    root = document.createElement('main');
    document.body.replaceChildren(root);
});

describe('session table', () => {
    it('renders id, status, step progress, and response quota', () => {
        const tbody = document.createElement('table').createTBody();
        renderSessions(tbody, [session({})]);
        const cells = Array.from(tbody.querySelectorAll('td')).map((td) => td.textContent);
        expect(cells.slice(0, 4)).toEqual(['s000001', 'collecting', '7/16 steps', '4/7 responses']);
        expect(tbody.querySelectorAll('img')).toHaveLength(0);
    });

    it('shows before/after thumbnails once a session is done', () => {
        const tbody = document.createElement('table').createTBody();
        renderSessions(tbody, [
            session({ status: 'done', s: null, l: null, step: 16, accepted_responses: 0 }),
        ]);
        const srcs = Array.from(tbody.querySelectorAll('img')).map((img) =>
            img.getAttribute('src'));
        expect(srcs).toEqual([
            '/sessions/s000001/input',
            '/sessions/s000001/result.png',
        ]);
        expect(tbody.querySelector('td')!.nextElementSibling!.textContent).toBe('done');
    });

    it('renders an empty table for an empty service', () => {
        const tbody = document.createElement('table').createTBody();
        renderSessions(tbody, [session({})]);
        renderSessions(tbody, []);
        expect(tbody.querySelectorAll('tr')).toHaveLength(0);
    });
});

describe('admin page', () => {
    it('fills the table and polls every two seconds', async () => {
        vi.useFakeTimers();
        let calls = 0;
        const fetchFn = async () => {
            calls += 1;
            return stub(200, { sessions: [session({})] });
        };
        const page = initAdminPage(root, '', fetchFn);
        await page.refresh();
        expect(root.querySelectorAll('tbody tr')).toHaveLength(1);
        expect(root.querySelector('.banner')!.hasAttribute('hidden')).toBe(true);
        const before = calls;
        await vi.advanceTimersByTimeAsync(POLL_MS);
        expect(calls).toBe(before + 1);
        page.stop();
        await vi.advanceTimersByTimeAsync(3 * POLL_MS);
        expect(calls).toBe(before + 1);
        vi.useRealTimers();
    });

    it('raises the error banner on fetch failure and clears it after', async () => {
        let fail = true;
        const fetchFn = async () => {
            if (fail) {
                throw new TypeError('connection refused');
            }
            return stub(200, { sessions: [] });
        };
        const page = initAdminPage(root, '', fetchFn);
        await page.refresh();
        const banner = root.querySelector<HTMLElement>('.banner')!;
        expect(banner.hidden).toBe(false);
        expect(banner.textContent).toContain('connection refused');
        fail = false;
        await page.refresh();
        expect(banner.hidden).toBe(true);
        page.stop();
    });
});
