/** Annotation session state for one task.
 *
 * Single state container: every mutation goes through the methods here,
 * and the view re-renders from scratch after each one. Invariants kept:
 * at most one current markable; selected entities and pending spans are
 * empty whenever no markable is current; a markable is done exactly
 * when it has a link target. Relinking stays possible until the final
 * submission (last write wins).
 */

import type {
  AnnotationRecordData,
  DocumentData,
  EntityData,
  LinkTargetData,
  Protocol,
  SpanTriple,
  TaskBundle,
} from "./types.js";
import type { MarkableStatus } from "./theme.js";

export interface SessionHooks {
  /** Per linking action: the current (possibly partial) record, for draft sync. */
  onDraft?: (record: AnnotationRecordData) => void;
  onWarning?: (message: string) => void;
  /** Clock in seconds since the epoch; injectable for tests. */
  now?: () => number;
}

export class AnnotationSession {
  readonly document: DocumentData;
  readonly protocol: Protocol;
  readonly issuedAt: number;
  readonly deadline: number;

  private links = new Map<string, LinkTargetData>();
  private currentMarkable: string | null = null;
  private selectedEntities = new Set<string>();
  private pendingSpans: SpanTriple[] = [];
  private sessionEntities: EntityData[] = [];
  private lastWarning: string | null = null;
  private readonly hooks: SessionHooks;
  private readonly clock: () => number;

  constructor(readonly annotatorId: string, task: TaskBundle, hooks: SessionHooks = {}) {
    this.document = task.document;
    this.protocol = task.protocol;
    this.issuedAt = task.issued_at;
    this.deadline = task.deadline;
    this.hooks = hooks;
    this.clock = hooks.now ?? (() => Date.now() / 1000);
  }

  // -- queries ---------------------------------------------------------------

  get current(): string | null {
    return this.currentMarkable;
  }

  statusOf(markableId: string): MarkableStatus {
    if (this.currentMarkable === markableId) return "selected";
    return this.links.has(markableId) ? "done" : "todo";
  }

  isEntitySelected(entityId: string): boolean {
    return this.selectedEntities.has(entityId);
  }

  targetOf(markableId: string): LinkTargetData | undefined {
    return this.links.get(markableId);
  }

  pendingSpanCount(): number {
    return this.pendingSpans.length;
  }

  /** Inventory plus entities added during this session. */
  entities(): EntityData[] {
    return [...this.document.entities, ...this.sessionEntities];
  }

  allDone(): boolean {
    return this.document.markables.every((m) => this.links.has(m.id));
  }

  remainingSeconds(): number {
    return Math.max(0, this.deadline - this.clock());
  }

  /** The submit action is available only when every markable is green
   * and the deadline has not passed. */
  submitEnabled(): boolean {
    return this.allDone() && this.clock() <= this.deadline;
  }

  warning(): string | null {
    return this.lastWarning;
  }

  // -- selection --------------------------------------------------------------

  selectMarkable(markableId: string): void {
    if (!this.document.markables.some((m) => m.id === markableId)) {
      throw new Error(`unknown markable ${markableId}`);
    }
    this.currentMarkable = markableId;
    this.selectedEntities.clear();
    this.pendingSpans = [];
    this.lastWarning = null;
  }

  clearSelection(): void {
    this.currentMarkable = null;
    this.selectedEntities.clear();
    this.pendingSpans = [];
  }

  toggleEntity(entityId: string): void {
    if (this.protocol !== "grounded") {
      this.warn("entities are only selectable in the grounded task");
      return;
    }
    if (this.currentMarkable === null) {
      this.warn("select a mention first");
      return;
    }
    if (this.selectedEntities.has(entityId)) {
      this.selectedEntities.delete(entityId);
    } else {
      this.selectedEntities.add(entityId);
    }
  }

  /** Entity returned by POST /api/entity joins the sidebar for linking. */
  registerEntity(entity: EntityData): void {
    if (!this.entities().some((e) => e.id === entity.id)) {
      this.sessionEntities.push(entity);
    }
  }

  // -- linking flows -----------------------------------------------------------

  /** Grounded: link the current markable to the selected entities. */
  linkEntities(): boolean {
    if (this.protocol !== "grounded") {
      this.warn("Link applies to the grounded task; use Finalize here");
      return false;
    }
    if (this.currentMarkable === null) {
      this.warn("select a mention first");
      return false;
    }
    if (this.selectedEntities.size === 0) {
      this.warn("select at least one entity before linking");
      return false;
    }
    this.commit(this.currentMarkable, {
      variant: "entity_set",
      entity_ids: [...this.selectedEntities].sort(),
    });
    return true;
  }

  /** Span: accumulate one highlighted span (the Link Entity button).
   * Duplicate offsets are ignored; click order is preserved. */
  addSpan(span: SpanTriple | null): boolean {
    if (this.protocol !== "span") {
      this.warn("span selection applies to the span task");
      return false;
    }
    if (this.currentMarkable === null) {
      this.warn("select a mention first");
      return false;
    }
    if (span === null) {
      this.warn("highlight a span first");
      return false;
    }
    const [sec, start, end] = span;
    const section = this.document.sections[sec];
    if (!section || start < 0 || start >= end || end > section.text.length) {
      this.warn("selection is outside the document");
      return false;
    }
    if (!this.pendingSpans.some(([a, b, c]) => a === sec && b === start && c === end)) {
      this.pendingSpans.push(span);
    }
    this.lastWarning = null;
    return true;
  }

  /** Span: close the linking episode (the Finalize button). */
  finalizeSpans(): boolean {
    if (this.protocol !== "span") {
      this.warn("Finalize applies to the span task");
      return false;
    }
    if (this.currentMarkable === null) {
      this.warn("select a mention first");
      return false;
    }
    if (this.pendingSpans.length === 0) {
      this.warn("accumulate at least one span before finalizing");
      return false;
    }
    this.commit(this.currentMarkable, {
      variant: "span_set",
      spans: [...this.pendingSpans],
    });
    return true;
  }

  /** Either protocol: explicit no-antecedent mark. */
  markNoReference(): boolean {
    if (this.currentMarkable === null) {
      this.warn("select a mention first");
      return false;
    }
    this.commit(this.currentMarkable, { variant: "no_reference" });
    return true;
  }

  // -- record assembly -----------------------------------------------------------

  buildRecord(): AnnotationRecordData {
    const finished = this.clock();
    const linkedIds = new Set<string>();
    for (const target of this.links.values()) {
      if (target.variant === "entity_set") {
        for (const id of target.entity_ids) linkedIds.add(id);
      }
    }
    return {
      annotator_id: this.annotatorId,
      document_id: this.document.id,
      protocol: this.protocol,
      links: Object.fromEntries([...this.links.entries()].sort(([a], [b]) => (a < b ? -1 : 1))),
      added_entities: this.sessionEntities.filter((e) => linkedIds.has(e.id)),
      started_at: this.issuedAt,
      finished_at: finished,
      duration: finished - this.issuedAt,
    };
  }

  // -- internals --------------------------------------------------------------------

  private commit(markableId: string, target: LinkTargetData): void {
    this.links.set(markableId, target);
    this.currentMarkable = null;
    this.selectedEntities.clear();
    this.pendingSpans = [];
    this.lastWarning = null;
    this.hooks.onDraft?.(this.buildRecord());
  }

  private warn(message: string): void {
    this.lastWarning = message;
    this.hooks.onWarning?.(message);
  }
}
