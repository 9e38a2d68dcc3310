// The whole review session against a freshly spawned desk-scale backend:
// gallery lists every image, the overlay endpoint answers for all five
// methods, a one-op Enlarge plan runs the apply job to completion, and the
// comparison table renders exactly the values GET /api/comparison reports.
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { UiSession } from "../src/session.js";
import { METHOD_KEYS } from "../src/types.js";
import { renderComparison } from "../src/views/comparison.js";
import { renderGallery } from "../src/views/gallery.js";
import { Backend, startBackend } from "./backend.js";

let backend: Backend;
let api: ApiClient;

beforeAll(async () => {
    backend = await startBackend();
    api = new ApiClient(backend.baseUrl);
}, 120_000);

afterAll(() => {
    backend?.stop();
});

describe("review session", () => {
    it("gallery lists all training images with badges", async () => {
        const images = await api.listImages();
        expect(images).toHaveLength(5);

        const el = document.createElement("div");
        renderGallery(el, api, images, { onSelect: () => {} });
        expect(el.querySelectorAll(".gallery-card")).toHaveLength(5);
        for (const entry of images) {
            expect(entry.width).toBe(32);
            expect(entry.iou === null || (entry.iou >= 0 && entry.iou <= 100)).toBe(true);
        }
    });

    it("overlay endpoint answers for all five methods", async () => {
        const images = await api.listImages();
        const imageId = images[0].id;
        for (const method of METHOD_KEYS) {
            const response = await fetch(api.overlayUrl(imageId, method, 1, 0.5));
            expect(response.status, method).toBe(200);
            expect(response.headers.get("content-type")).toBe("image/png");
            const bytes = new Uint8Array(await response.arrayBuffer());
            expect(Array.from(bytes.slice(0, 4))).toEqual([0x89, 0x50, 0x4e, 0x47]);
        }
    });

    it("methods table carries the chosen method", async () => {
        const methods = await api.getMethods();
        expect(methods.rows).toHaveLength(5);
        expect(methods.ranking[0]).toBe(methods.chosen);
    });

    it("a one-op Enlarge plan completes the apply job and the comparison table matches the API", async () => {
        const session = new UiSession();
        expect(session.addEnlargeOp(1, 2, "cables are under-annotated")).toBeNull();
        expect(session.validatePlan()).toEqual([]);

        const planId = await api.submitPlan(session.planPayload("e2e"));
        const jobId = await api.applyPlan(planId);
        const job = await api.waitForJob(jobId, 150_000);
        expect(job.status).toBe("done");

        const comparison = await api.getComparison();
        expect(comparison.enhanced).not.toBeNull();

        const el = document.createElement("div");
        renderComparison(el, comparison);
        const header = el.querySelectorAll("tr")[0];
        expect(header.textContent).toBe(
            "Model" + comparison.categories.map((c) => c.name).join("") + "Overall",
        );
        for (const [label, side] of [
            ["Original", comparison.original!],
            ["Enhanced", comparison.enhanced!],
        ] as const) {
            const row = el.querySelector(`tr[data-model="${label}"]`)!;
            const cells = Array.from(row.querySelectorAll("td")).map((c) => c.textContent);
            comparison.categories.forEach((category, index) => {
                const value = side.per_class[category.name];
                expect(cells[index + 1]).toBe(value === null ? "-" : value.toFixed(2));
            });
            expect(cells[cells.length - 1]).toBe(side.overall.toFixed(2));
        }
    }, 160_000);

    it("badge values equal the comparison per-image values", async () => {
        const images = await api.listImages();
        const comparison = await api.getComparison();
        const perImage = comparison.original!.per_image;
        for (const entry of images) {
            const stored = perImage[String(entry.id)];
            if (entry.iou === null) {
                expect(stored).toBeNull();
            } else {
                expect(stored).toBeCloseTo(entry.iou, 9);
            }
        }
    });
});
