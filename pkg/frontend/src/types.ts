// Wire types mirroring the session service's JSON schema.
// The client renders these verbatim: all diagnosis logic is server-side.

export type Value = boolean | number | string;

export type Domain =
  | "boolean"
  | "integer"
  | "real"
  | { enum: Value[] }
  | { real: { tolerance: number } };

export interface BranchDoc {
  guard: string;
  reads?: string[];
  expr: string;
}

export interface ComponentDoc {
  id: string;
  type: "source" | "function";
  inputs?: string[];
  function?: { branches: BranchDoc[]; masking?: string[] };
  prior?: number;
  domain?: Domain;
  stateful?: { delay: number; initial?: Value };
}

export interface ModelDocument {
  components: ComponentDoc[];
  connections: { from: string; to: string }[];
  observables?: string[];
  epsilon?: number;
  time_horizon?: number;
}

export interface ObservationView {
  component: string;
  time: number;
  value: Value;
}

export interface AssumptionView {
  wire: string;
  time: number;
  value: Value;
}

export interface EvidenceView {
  kind: "conflict" | "confirmation";
  origin: string;
  members: string[];
  focused_members: string[];
  assumptions: AssumptionView[];
}

export interface FocusView {
  members: string[];
  score: number;
  under_assumed_broken?: string;
}

export interface FocusReport {
  focuses: FocusView[];
  rule: string;
  mode?: string;
}

export interface AdviceView {
  probe: string;
  time: number;
  strategy: string;
  criterion_value: number;
  bounds?: [number, number];
}

export type SessionStatus = "active" | "diagnosed" | "exhausted" | "inconsistent";

export interface TranscriptStep {
  measurement: ObservationView;
  evidence: EvidenceView[];
  focuses: FocusReport;
  advice: AdviceView | null;
  status: SessionStatus;
}

export interface SessionView {
  id: string;
  model_id: string;
  status: SessionStatus;
  rule: string;
  mode: string;
  strategy: string;
  observations: ObservationView[];
  evidence: EvidenceView[];
  focuses: FocusReport;
  advice: AdviceView | null;
  diagnosed: string[];
  transcript: TranscriptStep[];
}

export interface ServiceErrorBody {
  error: string;
  message: string;
}
