// Shared types mirroring the annotation service's JSON API.

export const LABELS = ["happiness", "neutral", "fear", "sadness", "anger"] as const;
export type EmotionLabel = (typeof LABELS)[number];

export interface ContextLine {
  speaker: string;
  text: string;
  target: boolean;
}

export interface QueueItem {
  sample_id: string;
  dialogue_id: string;
  index: number;
  text: string;
  domain: string | null;
  context: ContextLine[];
  labels: string[];
}

export interface QueueResponse {
  annotator: string;
  items: QueueItem[];
}

export interface StatusCounts {
  pending: number;
  accepted: number;
  rejected: number;
}

export interface Progress extends StatusCounts {
  per_emotion: Record<string, StatusCounts>;
  per_domain: Record<string, StatusCounts>;
  per_annotator: Record<string, number>;
  round: number;
}

export interface AgreementCounts {
  accepted: number;
  rejected: number;
}

export interface Agreement {
  per_emotion: Record<string, AgreementCounts>;
  per_domain: Record<string, AgreementCounts>;
  targets: Record<string, number>;
  deficit: Record<string, number>;
  round: number;
}

export interface VerdictAck {
  sample_id: string;
  status: string;
  your_label: string;
  token: string | null;
}
