/**
 * Admin progress page: a table of all hosted sessions, refreshed every
 * two seconds, with before/after thumbnails once a session finishes.
 */

import { SessionProgress, progressLabel, responsesLabel } from './core.js';

export const POLL_MS = 2000;

type FetchFn = (input: string) => Promise<Response>;

export function renderSessions(
    tbody: HTMLTableSectionElement,
    sessions: SessionProgress[],
    base = '',
): void {
    const doc = tbody.ownerDocument;
    tbody.replaceChildren();
    for (const session of sessions) {
        const row = doc.createElement('tr');
        const cells = [
            session.session_id,
            session.status,
            progressLabel(session),
            responsesLabel(session),
        ];
        for (const text of cells) {
            const td = doc.createElement('td');
            td.textContent = text;
            row.appendChild(td);
        }
        const images = doc.createElement('td');
        images.className = 'thumbs';
        if (session.status === 'done') {
            for (const path of ['input', 'result.png']) {
                const img = doc.createElement('img');
                img.src = `${base}/sessions/${session.session_id}/${path}`;
                images.appendChild(img);
            }
        }
        row.appendChild(images);
        tbody.appendChild(row);
    }
}

export interface AdminPage {
    refresh(): Promise<void>;
    stop(): void;
}

export function initAdminPage(
    root: HTMLElement,
    base = '',
    fetchFn?: FetchFn,
): AdminPage {
    const doc = root.ownerDocument;
    const doFetch: FetchFn = fetchFn ?? ((input) => globalThis.fetch(input));

    const banner = doc.createElement('p');
    banner.className = 'banner';
    banner.hidden = true;
    const table = doc.createElement('table');
    const head = doc.createElement('tr');
    for (const title of ['session', 'status', 'progress', 'responses', 'before / after']) {
        const th = doc.createElement('th');
        th.textContent = title;
        head.appendChild(th);
    }
    table.createTHead().appendChild(head);
    const tbody = table.createTBody();
    root.replaceChildren(banner, table);

    const refresh = async () => {
        try {
            const res = await doFetch(`${base}/sessions`);
            if (!res.ok) {
                throw new Error(`service error (${res.status})`);
            }
            const payload = (await res.json()) as { sessions: SessionProgress[] };
            renderSessions(tbody, payload.sessions, base);
            banner.hidden = true;
        } catch (err) {
            banner.textContent = `failed to fetch sessions: ${String(err)}`;
            banner.hidden = false;
        }
    };

    const timer = setInterval(() => void refresh(), POLL_MS);
    void refresh();
    return {
        refresh,
        stop: () => clearInterval(timer),
    };
}
