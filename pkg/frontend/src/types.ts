/** Wire types for the /v1 JSON API. Field encodings mirror the telemetry
 * schema: family 1/2/3 (MNL/MMNL/LC), transforms 1/2/3
 * (linear/boxcox/log), interactions 0..5, distributions 0/1/2
 * (fixed/normal/lognormal). */

export interface SpecJson {
  model: number;
  ASC: number;
  n_class: number;
  [indexed: `att_${number}` | `s_${number}` | `t_${number}` |
    `int_${number}` | `dist_${number}` | `covariates_${number}`]: number;
}

export interface ModelBadge {
  model_id: number;
  family?: number;
  status: "estimated" | "misspecified" | "pending";
  cached?: boolean;
}

export interface SessionView {
  session_id: string;
  user_id: string;
  dataset_ref: string;
  current_phase: "DA" | "MS" | "OI" | "R";
  closed: boolean;
  time_limit: number;
  n_events: number;
  models: ModelBadge[];
}

export interface ParameterRow {
  name: string;
  estimate: number;
  robust_se: number;
  t_stat: number;
  p_value: number;
}

export interface ModelDetail {
  model_id: number;
  status: string;
  cached?: boolean;
  poll?: string;
  spec?: SpecJson;
  parameters?: ParameterRow[];
  fit?: Record<string, number>;
}

export interface ModelRequestReply {
  model_id: number;
  status: string;
  cached?: boolean;
  poll?: string;
}

export interface ReportReply {
  session_id: string;
  closed: boolean;
  r_models: number[];
}

export interface Violation {
  constraint: string;
  detail?: string;
}

export interface ApiErrorBody {
  error: string;
  detail?: string;
  violations?: Violation[];
}
