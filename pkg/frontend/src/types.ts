// Payload shapes of the platform HTTP API (see ../schemas/api.md).
// The UI never computes monetary or statistical values; it displays
// exactly what these payloads carry.

export interface Affiliation {
  affiliation_id: string;
  name: string;
  region_tag: string | null;
}

export interface EnrollResponse {
  driver_id: string;
  token: string;
  affiliation_id: string | null;
}

export interface LinkResponse {
  driver_id: string;
  account_id: string;
  phase: string;
}

export interface StatusResponse {
  driver_id: string;
  phase: string | null;
  activities_ingested: number;
  survey_invited?: boolean;
}

export interface SurveyQuestion {
  key: string;
  text: string;
  answer_type: "percentage" | "free_text";
  min?: number;
  max?: number;
  max_length?: number;
}

export interface SurveyDefinition {
  survey_id: string;
  version: string;
  title: string;
  questions: SurveyQuestion[];
}

export interface SurveyAnswers {
  estimated_take_rate_pct: number;
  fair_take_rate_pct: number;
  factors_text: string;
}

export interface PersonalSummary {
  driver_id: string;
  no_analyzable_rides: boolean;
  n_rides: number;
  average_take_rate_pct: number | null;
  highest_take_rate_pct: number | null;
  lowest_take_rate_pct: number | null;
}

export interface SummaryResponse {
  locked: boolean;
  message?: string;
  summary?: PersonalSummary;
}

export interface DeletionReceipt {
  driver_id: string;
  deleted_at: string;
  removed: Record<string, number>;
}

export interface GroupSummary {
  group: string;
  n_drivers: number;
  n_rides: number;
  distance_miles_mean: number;
  duration_minutes_mean: number;
  rider_price_mean_usd: string;
  fees_mean_usd: string;
  base_pay_mean_usd: string;
  tips_mean_usd: string;
  take_rate_mean_of_ratios_pct: number;
  take_rate_ratio_of_means_pct: number;
}

export interface WeekPoint {
  iso_week: string;
  mean_take_rate_pct: number;
  n_rides: number;
}

export interface Comparison {
  label_a: string;
  label_b: string;
  n_a: number;
  n_b: number;
  mean_a_pct: number | null;
  mean_b_pct: number | null;
  mode_a_pct: number | null;
  mode_b_pct: number | null;
  bin_width_pct: number;
  p_value: number | null;
  test_name: string;
  significant_at_05: boolean;
  values_a?: number[];
  values_b?: number[];
}

export interface Perception {
  mean_estimated_pct: number | null;
  mean_fair_pct: number | null;
  actual_pct: number | null;
  n_respondents: number;
}

export interface RateBin {
  lo_miles: number;
  hi_miles: number;
  mean_rate_usd_per_mile: number;
  n_rides: number;
}

export interface AggregatesResponse {
  digest: string;
  cache_hit: boolean;
  cleaning_report: {
    input_count: number;
    retained_count: number;
    excluded: Record<string, number>;
  };
  summaries: Record<string, GroupSummary>;
  weekly_series: WeekPoint[];
  comparisons: Record<string, Comparison>;
  perception: Perception;
  rate_per_mile: RateBin[];
}

export interface FilterState {
  affiliation_ids: string[];
  date_from: string | null; // ISO date or null
  date_to: string | null;
  categories: string[]; // subset of ["airport", "surge"]
}

export interface ApiError {
  status: number;
  code: string;
  message: string;
}
