import { MethodKey, PlanOp, PlanPayload } from "./types.js";

export interface Point {
    x: number;
    y: number;
}

/** Snap a continuous image coordinate to the center of its pixel, matching
 *  the rasterization rule the backend uses (pixel (r, c) tests its center
 *  (c+0.5, r+0.5)). What the expert draws is exactly what the mask becomes. */
export function snapToPixelCenter(value: number): number {
    return Math.floor(value) + 0.5;
}

export interface DraftPolygon {
    imageId: number;
    points: Point[];
}

/** Client-side state for one review session: current selection plus the
 *  augmentation plan being drafted. Validation mirrors the server rules so
 *  bad plans are blocked before they ever leave the browser. */
export class UiSession {
    selectedImageId: number | null = null;
    selectedMethod: MethodKey = "gradcam";
    alpha = 0.5;
    jobId: string | null = null;
    jobStage = "";

    ops: PlanOp[] = [];
    polygon: DraftPolygon | null = null;

    addEnlargeOp(categoryId: number, radius: number, rationale = ""): string | null {
        if (!Number.isInteger(radius) || radius < 0) {
            return "radius must be a whole number >= 0";
        }
        if (!Number.isInteger(categoryId) || categoryId < 1) {
            return "pick a category";
        }
        this.ops.push({ kind: "enlarge", category_id: categoryId, radius, rationale });
        return null;
    }

    beginPolygon(imageId: number): void {
        this.polygon = { imageId, points: [] };
    }

    addPolygonPoint(x: number, y: number): void {
        if (!this.polygon) {
            return;
        }
        const point = { x: snapToPixelCenter(x), y: snapToPixelCenter(y) };
        const last = this.polygon.points[this.polygon.points.length - 1];
        if (last && last.x === point.x && last.y === point.y) {
            return; // snapping collapsed a double click
        }
        this.polygon.points.push(point);
    }

    cancelPolygon(): void {
        this.polygon = null;
    }

    /** Close the polygon into an add-annotation op. Needs >= 3 points. */
    finishPolygon(categoryName: string, categoryId: number | null = null, rationale = ""): string | null {
        if (!this.polygon) {
            return "no polygon in progress";
        }
        const { imageId, points } = this.polygon;
        const distinct = new Set(points.map((p) => `${p.x},${p.y}`));
        if (distinct.size < 3) {
            return "a polygon needs at least 3 distinct points";
        }
        if (!categoryName && categoryId === null) {
            return "pick or name a category";
        }
        const flat: number[] = [];
        for (const p of points) {
            flat.push(p.x, p.y);
        }
        this.ops.push({
            kind: "add",
            image_id: imageId,
            category_id: categoryId,
            category_name: categoryName || null,
            polygon: flat,
            rationale,
        });
        this.polygon = null;
        return null;
    }

    removeOp(index: number): void {
        this.ops.splice(index, 1);
    }

    /** Empty list of problems means the plan may be submitted. */
    validatePlan(): string[] {
        const problems: string[] = [];
        if (this.ops.length === 0) {
            problems.push("the plan is empty; add at least one operation");
        }
        this.ops.forEach((op, index) => {
            if (op.kind === "enlarge" && op.radius < 0) {
                problems.push(`op ${index}: negative radius`);
            }
            if (op.kind === "add" && (!op.polygon || op.polygon.length < 6) && !op.rle) {
                problems.push(`op ${index}: geometry missing or too small`);
            }
        });
        return problems;
    }

    planPayload(author = "review-ui"): PlanPayload {
        return { ops: this.ops, author, timestamp: new Date().toISOString() };
    }

    clearPlan(): void {
        this.ops = [];
        this.polygon = null;
    }
}
