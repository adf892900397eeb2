import { ApiClient } from './api.js';
import { SessionController } from './controller.js';
import { CLASS_COLORS, FieldRenderer } from './field.js';
import { FieldViewState } from './state.js';
import { Viewport } from './transform.js';
import { ViewKey } from './types.js';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function toast(message: string): void {
  const node = el<HTMLDivElement>('toast');
  node.textContent = message;
  node.classList.add('visible');
  setTimeout(() => node.classList.remove('visible'), 3500);
}

async function boot(): Promise<void> {
  const canvas = el<HTMLCanvasElement>('field');
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
  const viewport = new Viewport(canvas.width, canvas.height);
  const renderer = new FieldRenderer(canvas, viewport);
  const state = new FieldViewState();

  let dragRect: { x0: number; y0: number; x1: number; y1: number } | null = null;
  const redraw = () => {
    renderer.draw(state, dragRect);
    renderHeader();
    renderAudit().catch(() => undefined);
  };
  const controller = new SessionController(new ApiClient(), state, redraw);

  function renderHeader(): void {
    const counts = state.counts();
    const parts = Object.entries(counts.perClass)
      .sort()
      .map(([cls, n]) => `<span class="chip" style="border-color:${CLASS_COLORS[cls]}">${cls}: ${n}</span>`);
    parts.push(`<span class="chip rejected">rejected: ${counts.rejected}</span>`);
    el('counts').innerHTML = parts.join(' ');
    el('selection-size').textContent = `${state.selection.size} selected`;
    const err = el('toast');
    if (state.lastError && err.textContent !== state.lastError) toast(state.lastError);
  }

  async function renderAudit(): Promise<void> {
    const { events } = await controller.api.getAudit();
    const list = el<HTMLUListElement>('audit');
    list.innerHTML = events
      .slice(-25)
      .reverse()
      .map((e) => {
        const who = `#${e.seq} ${e.action}${e.new_class ? ' → ' + e.new_class : ''}`;
        const restore =
          e.action === 'reject'
            ? ` <button class="restore" data-ids="${e.ids.join(',')}">restore</button>`
            : '';
        return `<li><code>${who}</code> (${e.ids.length})${restore}</li>`;
      })
      .join('');
    list.querySelectorAll<HTMLButtonElement>('button.restore').forEach((button) => {
      button.onclick = () => {
        controller.restoreIds(button.dataset.ids?.split(',') ?? []).catch((e) => toast(String(e)));
      };
    });
  }

  // --- class buttons + keyboard shortcuts (1..7) ---------------------------
  const classesBox = el('classes');
  const classButtons: string[] = [];
  const buildClassButtons = () => {
    if (!state.session || classButtons.length) return;
    state.session.classes.forEach((cls, i) => {
      classButtons.push(cls);
      const button = document.createElement('button');
      button.innerHTML = `<b>${i + 1}</b> ${cls}`;
      button.style.borderColor = CLASS_COLORS[cls] ?? '#888';
      button.onclick = () => void controller.reclassifySelection(cls);
      classesBox.appendChild(button);
    });
  };

  document.addEventListener('keydown', (event) => {
    if (event.target instanceof HTMLInputElement) return;
    const index = parseInt(event.key, 10) - 1;
    if (index >= 0 && index < classButtons.length && state.selection.size > 0) {
      void controller.reclassifySelection(classButtons[index]);
    } else if (event.key === 'x' && state.selection.size > 0) {
      void controller.rejectSelection();
    } else if (event.key === 'Escape') {
      state.clearSelection();
      redraw();
    }
  });

  el<HTMLButtonElement>('reject').onclick = () => void controller.rejectSelection();
  el<HTMLButtonElement>('clear').onclick = () => {
    state.clearSelection();
    redraw();
  };
  el<HTMLInputElement>('uncertainty').onchange = (event) => {
    renderer.showUncertainty = (event.target as HTMLInputElement).checked;
    redraw();
  };
  el<HTMLSelectElement>('view').onchange = (event) => {
    void controller.setView((event.target as HTMLSelectElement).value as ViewKey);
  };
  el<HTMLAnchorElement>('export').onclick = () => window.open('/api/export', '_blank');

  // --- pan / zoom / rectangle selection ------------------------------------
  let mode: 'idle' | 'pan' | 'select' = 'idle';
  let last = { x: 0, y: 0 };

  canvas.addEventListener('mousedown', (event) => {
    last = { x: event.offsetX, y: event.offsetY };
    mode = event.shiftKey || event.button === 1 ? 'pan' : 'select';
    if (mode === 'select') {
      dragRect = { x0: last.x, y0: last.y, x1: last.x, y1: last.y };
    }
  });
  canvas.addEventListener('mousemove', (event) => {
    if (mode === 'pan') {
      viewport.panBy(event.offsetX - last.x, event.offsetY - last.y);
      last = { x: event.offsetX, y: event.offsetY };
      redraw();
    } else if (mode === 'select' && dragRect) {
      dragRect.x1 = event.offsetX;
      dragRect.y1 = event.offsetY;
      redraw();
    }
  });
  window.addEventListener('mouseup', () => {
    if (mode === 'select' && dragRect) {
      const a = viewport.toField({ x: dragRect.x0, y: dragRect.y0 });
      const b = viewport.toField({ x: dragRect.x1, y: dragRect.y1 });
      controller.selectRect({ x0: a.x, y0: a.y, x1: b.x, y1: b.y });
      dragRect = null;
    }
    mode = 'idle';
    redraw();
  });
  canvas.addEventListener('wheel', (event) => {
    event.preventDefault();
    viewport.zoomAt({ x: event.offsetX, y: event.offsetY }, event.deltaY < 0 ? 1.15 : 1 / 1.15);
    redraw();
  });

  await controller.load();
  buildClassButtons();
  redraw();
}

boot().catch((error) => {
  document.body.innerHTML = `<pre class="fatal">failed to load session: ${error}</pre>`;
});
