import type {
  AnnotationRecordData,
  DocumentData,
  EntityData,
  Protocol,
  TaskBundle,
} from "../src/types.js";

export function entity(id: string, name: string): EntityData {
  return {
    id,
    canonical_name: name,
    aliases: [name],
    provenance: "wikilink",
    target: `/wiki/${name.replace(/ /g, "_")}`,
  };
}

/** "He met her there." with two markables and three entities. */
export function sampleDocument(id = "doc1"): DocumentData {
  return {
    id,
    source: "wiki",
    title: "Sample",
    sections: [
      { index: 0, kind: "summary", text: "He met her there." },
      { index: 1, kind: "context", text: "Nothing else happened." },
    ],
    markables: [
      { id: "m1", section_index: 0, span: [0, 2], surface: "He", category: "personal" },
      { id: "m2", section_index: 0, span: [7, 10], surface: "her", category: "personal" },
    ],
    entities: [entity("e1", "Alpha"), entity("e2", "Beta"), entity("e3", "Gamma")],
  };
}

export function task(protocol: Protocol, doc?: DocumentData): TaskBundle {
  return {
    document: doc ?? sampleDocument(),
    protocol,
    issued_at: 1000,
    deadline: 1600,
  };
}

export class DraftLog {
  drafts: AnnotationRecordData[] = [];
  warnings: string[] = [];
  time = 1010;

  hooks() {
    return {
      onDraft: (r: AnnotationRecordData) => this.drafts.push(r),
      onWarning: (w: string) => this.warnings.push(w),
      now: () => this.time,
    };
  }
}
