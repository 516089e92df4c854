// Client-side session state: the last service response plus UI bookkeeping.
// Guards (duplicate measurements, out-of-domain values, terminal sessions)
// run before any request; everything displayed comes from the response.

import type {
  ComponentDoc,
  Domain,
  ModelDocument,
  SessionView,
  Value,
} from "./types.js";

export type ValueCheck =
  | { ok: true; value: Value }
  | { ok: false; error: string };

export type SubmitCheck = { ok: true } | { ok: false; error: string };

export function parseValue(domain: Domain | undefined, raw: string): ValueCheck {
  const text = raw.trim();
  const kind = domain ?? "boolean";
  if (kind === "boolean") {
    if (text === "true" || text === "1") return { ok: true, value: true };
    if (text === "false" || text === "0") return { ok: true, value: false };
    return { ok: false, error: `"${raw}" is not a boolean (use true/false)` };
  }
  if (kind === "integer") {
    if (/^-?\d+$/.test(text)) return { ok: true, value: Number(text) };
    return { ok: false, error: `"${raw}" is not an integer` };
  }
  if (kind === "real" || (typeof kind === "object" && "real" in kind)) {
    const value = Number(text);
    if (text !== "" && Number.isFinite(value)) return { ok: true, value };
    return { ok: false, error: `"${raw}" is not a number` };
  }
  const symbols = (kind as { enum: Value[] }).enum;
  const match = symbols.find((s) => String(s) === text);
  if (match !== undefined) return { ok: true, value: match };
  return {
    ok: false,
    error: `"${raw}" is outside the domain {${symbols.join(", ")}}`,
  };
}

export class SessionViewModel {
  view: SessionView | null = null;
  selected: string | null = null;
  pendingValue = "";
  historyCursor = -1; // -1 = live view
  private inFlight = false;

  constructor(public readonly model: ModelDocument) {}

  component(id: string): ComponentDoc | undefined {
    return this.model.components.find((c) => c.id === id);
  }

  applyResponse(view: SessionView): void {
    this.view = view;
    this.historyCursor = -1;
  }

  get status(): string {
    return this.view?.status ?? "idle";
  }

  isTerminal(): boolean {
    return this.view !== null && this.view.status !== "active";
  }

  // one in-flight mutation per session, enforced client-side
  beginMutation(): boolean {
    if (this.inFlight) return false;
    this.inFlight = true;
    return true;
  }

  endMutation(): void {
    this.inFlight = false;
  }

  measuredKeys(): Set<string> {
    const keys = new Set<string>();
    for (const o of this.view?.observations ?? []) {
      keys.add(`${o.component}@${o.time}`);
    }
    return keys;
  }

  canSubmit(component: string, time: number): SubmitCheck {
    if (this.view === null) return { ok: false, error: "no session" };
    if (this.isTerminal()) {
      return { ok: false, error: `session is ${this.view.status}` };
    }
    const doc = this.component(component);
    if (doc === undefined) {
      return { ok: false, error: `unknown component "${component}"` };
    }
    const observables = this.model.observables;
    if (doc.type !== "source" && observables && !observables.includes(component)) {
      return { ok: false, error: `"${component}" is not observable` };
    }
    if (this.measuredKeys().has(`${component}@${time}`)) {
      return { ok: false, error: `"${component}" already measured at t=${time}` };
    }
    return { ok: true };
  }

  checkValue(component: string, raw: string): ValueCheck {
    const doc = this.component(component);
    if (doc === undefined) {
      return { ok: false, error: `unknown component "${component}"` };
    }
    return parseValue(doc.domain, raw);
  }

  focusRows(): string[][] {
    return (this.view?.focuses.focuses ?? []).map((f) => [...f.members]);
  }

  adviceLabel(): string | null {
    const advice = this.view?.advice;
    if (!advice) return null;
    const at = advice.time === 0 ? "" : ` at t=${advice.time}`;
    return `measure ${advice.probe}${at} (${advice.strategy})`;
  }

  banner(): string | null {
    if (this.view === null) return null;
    switch (this.view.status) {
      case "diagnosed":
        return this.view.diagnosed.length
          ? `Diagnosed: ${this.view.diagnosed.join(", ")}`
          : "Diagnosed: no fault";
      case "exhausted":
        return "Exhausted: no probe can split the remaining focuses";
      case "inconsistent":
        return "Inconsistent evidence: every suspect is also confirmed";
      default:
        return null;
    }
  }

  transcriptRows(): { label: string; status: string }[] {
    return (this.view?.transcript ?? []).map((step) => ({
      label: `${step.measurement.component}@${step.measurement.time} = ` +
        `${JSON.stringify(step.measurement.value)}`,
      status: step.status,
    }));
  }
}
