// Browser bootstrap: wires the API client, view model and renderers to the
// DOM. Each user action refreshes from its own response; a manual refresh
// button covers multi-operator use.

import { SessionApi, ServiceError } from "./api.js";
import { layoutModel } from "./layout.js";
import {
  renderAdvice,
  renderBanner,
  renderEvidence,
  renderFocuses,
  renderGraph,
  renderTranscript,
} from "./render.js";
import { SessionViewModel } from "./viewmodel.js";
import type { ModelDocument } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

async function start(): Promise<void> {
  const api = new SessionApi("");
  const modelText = el<HTMLTextAreaElement>("model-input");
  const status = el<HTMLElement>("status");
  let vm: SessionViewModel | null = null;
  let model: ModelDocument | null = null;

  function redraw(): void {
    if (!vm || !model) return;
    el("banner").innerHTML = renderBanner(vm.view);
    el("focuses").innerHTML = renderFocuses(vm.view);
    el("advice").innerHTML = renderAdvice(vm.view);
    el("evidence").innerHTML = renderEvidence(vm.view);
    el("transcript").innerHTML = renderTranscript(vm.view);
    el("graph").innerHTML = renderGraph(layoutModel(model), vm.view);
    status.textContent = `session ${vm.view?.id ?? "-"} | ${vm.status}`;
    el<HTMLButtonElement>("submit").disabled = vm.isTerminal();
  }

  el<HTMLButtonElement>("create").addEventListener("click", async () => {
    try {
      model = JSON.parse(modelText.value) as ModelDocument;
      const uploaded = await api.uploadModel(model);
      vm = new SessionViewModel(model);
      const rule = el<HTMLSelectElement>("rule").value;
      const strategy = el<HTMLSelectElement>("strategy").value;
      const view = await api.createSession({
        model_id: uploaded.model_id, rule, strategy,
      });
      vm.applyResponse(view);
      redraw();
    } catch (error) {
      status.textContent = error instanceof Error ? error.message : String(error);
    }
  });

  el<HTMLButtonElement>("submit").addEventListener("click", async () => {
    if (!vm || !vm.view) return;
    const component = el<HTMLInputElement>("component").value.trim();
    const time = Number(el<HTMLInputElement>("time").value || "0");
    const raw = el<HTMLInputElement>("value").value;
    const submit = vm.canSubmit(component, time);
    if (!submit.ok) {
      status.textContent = submit.error;
      return;
    }
    const parsed = vm.checkValue(component, raw);
    if (!parsed.ok) {
      status.textContent = parsed.error;
      return;
    }
    if (!vm.beginMutation()) return;
    const button = el<HTMLButtonElement>("submit");
    button.disabled = true;
    try {
      const view = await api.submitMeasurement(vm.view.id, {
        component, time, value: parsed.value,
      });
      vm.applyResponse(view);
      redraw();
    } catch (error) {
      status.textContent = error instanceof ServiceError
        ? `${error.code}: ${error.message}`
        : String(error);
    } finally {
      vm.endMutation();
      button.disabled = vm.isTerminal();
    }
  });

  el<HTMLButtonElement>("refresh").addEventListener("click", async () => {
    if (!vm?.view) return;
    vm.applyResponse(await api.getSession(vm.view.id));
    redraw();
  });
}

document.addEventListener("DOMContentLoaded", () => {
  void start();
});
