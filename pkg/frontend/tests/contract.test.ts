// Contract tests against recorded service fixtures: the client renders
// focuses, advice and terminal banners field-for-field from the responses
// and never invents diagnosis state of its own.

import { describe, expect, it } from "vitest";

import fulladder from "../fixtures/fulladder_session.json";
import flipflop from "../fixtures/flipflop_session.json";
import { SessionViewModel } from "../src/viewmodel.js";
import {
  renderAdvice,
  renderBanner,
  renderFocuses,
  renderTranscript,
} from "../src/render.js";
import type { ModelDocument, SessionView } from "../src/types.js";

interface Fixture {
  model: string;
  model_document: ModelDocument;
  steps: { action: Record<string, unknown>; response: SessionView }[];
}

const fixtures: Fixture[] = [fulladder as unknown as Fixture, flipflop as unknown as Fixture];

describe.each(fixtures.map((f) => [f.model, f] as const))(
  "recorded session: %s",
  (_name, fixture) => {
    it("reproduces every step's focuses field-for-field", () => {
      const vm = new SessionViewModel(fixture.model_document);
      for (const step of fixture.steps) {
        vm.applyResponse(step.response);
        expect(vm.focusRows()).toEqual(
          step.response.focuses.focuses.map((f) => f.members),
        );
        const html = renderFocuses(vm.view);
        for (const focus of step.response.focuses.focuses) {
          for (const member of focus.members) {
            expect(html).toContain(
              member.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;"),
            );
          }
        }
        if (step.response.focuses.focuses.length > 0) {
          expect(html).toContain(`data-rule="${step.response.focuses.rule}"`);
        } else {
          expect(html).toContain("No focuses");
        }
      }
    });

    it("reproduces every step's advice field-for-field", () => {
      const vm = new SessionViewModel(fixture.model_document);
      for (const step of fixture.steps) {
        vm.applyResponse(step.response);
        const advice = step.response.advice;
        if (advice === null) {
          expect(vm.adviceLabel()).toBeNull();
          expect(renderAdvice(vm.view)).toContain("No probe advice");
        } else {
          expect(vm.adviceLabel()).toContain(advice.probe);
          expect(vm.adviceLabel()).toContain(advice.strategy);
          expect(renderAdvice(vm.view)).toContain(`data-probe="${advice.probe}"`);
        }
      }
    });

    it("shows the terminal banner exactly when the service says so", () => {
      const vm = new SessionViewModel(fixture.model_document);
      for (const step of fixture.steps) {
        vm.applyResponse(step.response);
        const banner = renderBanner(vm.view);
        if (step.response.status === "active") {
          expect(vm.banner()).toBeNull();
          expect(banner).toBe("");
        } else if (step.response.status === "diagnosed") {
          expect(banner).toContain("diagnosed");
          for (const cid of step.response.diagnosed) {
            expect(vm.banner()).toContain(cid);
            expect(banner).toContain(cid);
          }
        } else {
          expect(banner).not.toBe("");
        }
      }
    });

    it("renders the transcript in exact submission order", () => {
      const vm = new SessionViewModel(fixture.model_document);
      const last = fixture.steps[fixture.steps.length - 1]!.response;
      vm.applyResponse(last);
      const rows = vm.transcriptRows();
      expect(rows.length).toBe(last.transcript.length);
      rows.forEach((row, i) => {
        const m = last.transcript[i]!.measurement;
        expect(row.label).toContain(m.component);
      });
      const html = renderTranscript(vm.view);
      last.transcript.forEach((_step, i) => {
        expect(html).toContain(`data-step="${i}"`);
      });
    });
  },
);

describe("fixture-specific expectations", () => {
  it("full-adder: rule-2 focus {and2, or1} with probe and2, then diagnosed", () => {
    const fixture = fulladder as unknown as Fixture;
    const afterEvidence = fixture.steps[5]!.response; // xor2 measured
    expect(afterEvidence.focuses.focuses.map((f) => f.members)).toEqual([
      ["and2", "or1"],
    ]);
    expect(afterEvidence.advice?.probe).toBe("and2");
    const final = fixture.steps[6]!.response;
    expect(final.status).toBe("diagnosed");
    expect(final.diagnosed).toEqual(["or1"]);
  });

  it("flipflop: assumption focuses advise nand5, then {and7}", () => {
    const fixture = flipflop as unknown as Fixture;
    const afterEvidence = fixture.steps[5]!.response; // and7 measured
    expect(afterEvidence.focuses.focuses.map((f) => f.members)).toEqual([
      ["output(nand5)=false"],
      ["output(nand5)=true"],
    ]);
    expect(afterEvidence.advice?.probe).toBe("nand5");
    const final = fixture.steps[6]!.response;
    expect(final.focuses.focuses.map((f) => f.members)).toEqual([["and7"]]);
    expect(final.status).toBe("diagnosed");
  });
});
