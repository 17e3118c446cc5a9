export interface EmotionCategory {
  name: string;
  valence: "negative" | "positive";
  control: "low" | "high";
  intensity_levels: string[];
  is_other: boolean;
}

export interface WheelPayload {
  categories: EmotionCategory[];
}

export interface Statement {
  id: string;
  text: string;
  kind: "A" | "C" | "AC";
  categories: string[];
  source: string;
  facet?: string;
}

export interface StatementsPage {
  total: number;
  offset: number;
  statements: Statement[];
}

export interface AcPayload {
  free_text?: string;
  statement_ids?: string[];
}

export interface RecommendRequestBody {
  user_id: string;
  ac: AcPayload;
  k: number;
  protocol: "all_items" | "sampled";
}

export interface RecommendItem {
  book_id: string;
  title: string;
  score: number;
  description?: string;
  extended_description?: string;
}

export interface RecommendResponse {
  items: RecommendItem[];
  model_digest: string;
  latency_ms: number;
}

export interface HealthResponse {
  status: string;
  model_digest: string | null;
}
