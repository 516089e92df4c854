// Pure string renderers: every displayed focus, advice and banner comes
// field-for-field from the last service response (checked by the contract
// tests against recorded fixtures).

import type { GraphLayout } from "./layout.js";
import type { SessionView } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderFocuses(view: SessionView | null): string {
  const focuses = view?.focuses.focuses ?? [];
  if (focuses.length === 0) {
    return `<p class="empty">No focuses: no conflicting evidence yet.</p>`;
  }
  const rule = view?.focuses.rule ?? "";
  const items = focuses
    .map((f) => {
      const members = f.members.map((m) => `<code>${escapeHtml(m)}</code>`).join(", ");
      const under = f.under_assumed_broken
        ? ` <small>(assuming ${escapeHtml(f.under_assumed_broken)} broken)</small>`
        : "";
      return `<li class="focus" data-score="${f.score}">{${members}}${under}</li>`;
    })
    .join("");
  return `<div class="focus-report" data-rule="${escapeHtml(rule)}">` +
    `<ul class="focuses">${items}</ul></div>`;
}

export function renderAdvice(view: SessionView | null): string {
  const advice = view?.advice;
  if (!advice) return `<p class="empty">No probe advice.</p>`;
  const at = advice.time === 0 ? "" : ` at t=${advice.time}`;
  const bounds = advice.bounds
    ? ` <small>[${advice.bounds[0].toFixed(3)}, ${advice.bounds[1].toFixed(3)}]</small>`
    : "";
  return (
    `<p class="advice">Next probe: <strong data-probe="${escapeHtml(advice.probe)}">` +
    `${escapeHtml(advice.probe)}</strong>${at} ` +
    `<small>(${escapeHtml(advice.strategy)}, ` +
    `criterion ${advice.criterion_value.toFixed(3)})</small>${bounds}</p>`
  );
}

export function renderBanner(view: SessionView | null): string {
  if (!view || view.status === "active") return "";
  if (view.status === "diagnosed") {
    const text = view.diagnosed.length
      ? `Diagnosed: ${view.diagnosed.map(escapeHtml).join(", ")}`
      : "Diagnosed: no fault found";
    return `<div class="banner diagnosed">${text}</div>`;
  }
  if (view.status === "exhausted") {
    return `<div class="banner exhausted">Exhausted: no probe splits the remaining focuses</div>`;
  }
  return `<div class="banner inconsistent">Inconsistent evidence</div>`;
}

export function renderEvidence(view: SessionView | null): string {
  const evidence = view?.evidence ?? [];
  if (evidence.length === 0) return `<p class="empty">No evidence yet.</p>`;
  const rows = evidence
    .map((e) => {
      const members = e.focused_members.map(escapeHtml).join(", ");
      const assumptions = e.assumptions
        .map((a) => `output(${escapeHtml(a.wire)})=${JSON.stringify(a.value)}`)
        .join(", ");
      const extra = assumptions ? `; ${assumptions}` : "";
      return `<tr class="${e.kind}"><td>${e.kind}</td>` +
        `<td>${escapeHtml(e.origin)}</td><td>{${members}${extra}}</td></tr>`;
    })
    .join("");
  return `<table class="evidence"><thead><tr><th>kind</th><th>origin</th>` +
    `<th>focused set</th></tr></thead><tbody>${rows}</tbody></table>`;
}

export function renderTranscript(view: SessionView | null): string {
  const steps = view?.transcript ?? [];
  if (steps.length === 0) return `<p class="empty">No measurements yet.</p>`;
  const items = steps
    .map((s, i) => {
      const m = s.measurement;
      return `<li data-step="${i}"><code>${escapeHtml(m.component)}@${m.time}` +
        ` = ${JSON.stringify(m.value)}</code> <small>${s.status}</small></li>`;
    })
    .join("");
  return `<ol class="transcript">${items}</ol>`;
}

/** Focus members and the probe target, at the plain component level. */
export function highlightSets(view: SessionView | null): {
  focus: Set<string>;
  probe: string | null;
} {
  const focus = new Set<string>();
  for (const f of view?.focuses.focuses ?? []) {
    for (const label of f.members) {
      // strip "@t" time suffixes and assumption syntax down to the wire
      const assumption = label.match(/^output\(([^)]+)\)/);
      const plain = assumption ? assumption[1]! : label.split("@")[0]!;
      focus.add(plain);
    }
  }
  return { focus, probe: view?.advice?.probe ?? null };
}

const NODE_W = 110;
const NODE_H = 44;

export function renderGraph(layout: GraphLayout, view: SessionView | null): string {
  if (layout.nodes.length === 0) {
    return `<p class="empty">Empty model: nothing to draw.</p>`;
  }
  if (layout.nodes.length > 500) {
    const rows = layout.nodes
      .map((n) => `<li>${escapeHtml(n.members.join(", "))}</li>`)
      .join("");
    return `<ul class="graph-fallback">${rows}</ul>`;
  }
  const { focus, probe } = highlightSets(view);
  const measured = new Set(
    (view?.observations ?? []).map((o) => o.component),
  );
  const byId = new Map(layout.nodes.map((n) => [n.id, n]));
  const edges = layout.edges
    .map((e) => {
      const a = byId.get(e.from)!;
      const b = byId.get(e.to)!;
      return `<line x1="${a.x + NODE_W}" y1="${a.y + NODE_H / 2}" ` +
        `x2="${b.x}" y2="${b.y + NODE_H / 2}" class="edge" />`;
    })
    .join("");
  const nodes = layout.nodes
    .map((n) => {
      const classes = ["node"];
      if (n.isLoop) classes.push("loop-group");
      if (n.members.some((m) => focus.has(m))) classes.push("in-focus");
      if (n.members.some((m) => m === probe)) classes.push("probe");
      if (n.members.every((m) => measured.has(m))) classes.push("measured");
      const label = n.members.join(" | ");
      const badge = n.members.some((m) => m === probe)
        ? `<text x="${n.x + NODE_W / 2}" y="${n.y - 6}" class="probe-badge">probe</text>`
        : "";
      return (
        `<g class="${classes.join(" ")}" data-id="${escapeHtml(n.id)}">` +
        `<rect x="${n.x}" y="${n.y}" width="${NODE_W}" height="${NODE_H}" rx="6" />` +
        `<text x="${n.x + NODE_W / 2}" y="${n.y + NODE_H / 2 + 4}">` +
        `${escapeHtml(label)}</text>${badge}</g>`
      );
    })
    .join("");
  return (
    `<svg viewBox="0 0 ${layout.width} ${layout.height}" class="graph" ` +
    `width="${layout.width}" height="${layout.height}">${edges}${nodes}</svg>`
  );
}
