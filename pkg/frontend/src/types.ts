/** Wire types mirroring the task service's canonical serialization. */

export type Protocol = "grounded" | "span";

/** (section_index, char_start, char_end), half-open character offsets. */
export type SpanTriple = [number, number, number];

export interface SectionData {
  index: number;
  kind: "summary" | "context" | "question" | "answer";
  text: string;
}

export interface MarkableData {
  id: string;
  section_index: number;
  span: [number, number];
  surface: string;
  category: string;
}

export interface EntityData {
  id: string;
  canonical_name: string;
  aliases: string[];
  provenance: "wikilink" | "wikidata" | "annotator_added";
  target: string | null;
}

export interface DocumentData {
  id: string;
  source: "wiki" | "quac";
  title: string;
  sections: SectionData[];
  markables: MarkableData[];
  entities: EntityData[];
}

export type LinkTargetData =
  | { variant: "entity_set"; entity_ids: string[] }
  | { variant: "span_set"; spans: SpanTriple[] }
  | { variant: "no_reference" };

export interface AnnotationRecordData {
  annotator_id: string;
  document_id: string;
  protocol: Protocol;
  links: Record<string, LinkTargetData>;
  added_entities: EntityData[];
  started_at: number;
  finished_at: number;
  duration: number;
}

export interface TaskBundle {
  document: DocumentData;
  protocol: Protocol;
  issued_at: number;
  deadline: number;
}

export interface TaskResponse {
  status: "ok" | "no_task" | "refused";
  reason?: string;
  task?: TaskBundle;
}

export interface SubmitResponse {
  status: "accepted" | "draft" | "rejected" | "refused";
  duplicate?: boolean;
  reason?: string;
  violations?: { code: string; detail: string }[];
}
