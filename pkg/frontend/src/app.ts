import { ApiClient, ApiError } from "./api.js";
import { UiSession } from "./session.js";
import { CategoryRef, MethodKey } from "./types.js";
import { renderComparison } from "./views/comparison.js";
import { renderGallery, renderOfflineBanner } from "./views/gallery.js";
import { renderOverlayView } from "./views/overlay.js";
import { renderPlanEditor } from "./views/planEditor.js";

interface Panels {
    gallery: HTMLElement;
    overlay: HTMLElement;
    plan: HTMLElement;
    comparison: HTMLElement;
}

/** Composition root: owns the session state and re-renders the four panels.
 *  The only server mutations it performs are plan submission and apply. */
export class App {
    readonly session = new UiSession();
    private categories: CategoryRef[] = [];
    private activeCategory = 1;
    private serverErrors: string[] = [];

    constructor(private api: ApiClient, private panels: Panels) {}

    async start(): Promise<void> {
        await this.refreshGallery();
        await this.refreshComparison();
        this.renderPlan();
    }

    async refreshGallery(): Promise<void> {
        try {
            const images = await this.api.listImages();
            renderGallery(this.panels.gallery, this.api, images, {
                onSelect: (imageId) => this.selectImage(imageId),
            });
        } catch (error) {
            renderOfflineBanner(this.panels.gallery, String(error));
        }
    }

    async selectImage(imageId: number): Promise<void> {
        this.session.selectedImageId = imageId;
        try {
            const annotations = await this.api.getAnnotations(imageId);
            this.categories = annotations.categories;
            if (!this.categories.some((c) => c.id === this.activeCategory) && this.categories.length) {
                this.activeCategory = this.categories[0].id;
            }
        } catch {
            this.categories = [];
        }
        this.renderOverlay();
        this.renderPlan();
    }

    setMethod(method: MethodKey): void {
        this.session.selectedMethod = method;
        this.renderOverlay();
    }

    setAlpha(alpha: number): void {
        this.session.alpha = alpha;
        this.renderOverlay();
    }

    setCategory(categoryId: number): void {
        this.activeCategory = categoryId;
        this.renderOverlay();
    }

    renderOverlay(): void {
        renderOverlayView(this.panels.overlay, this.api, this.session, this.categories, this.activeCategory, {
            onMethodChange: (method) => this.setMethod(method),
            onAlphaChange: (alpha) => this.setAlpha(alpha),
            onCategoryChange: (categoryId) => this.setCategory(categoryId),
        });
    }

    renderPlan(): void {
        renderPlanEditor(this.panels.plan, this.session, this.categories, {
            onSubmit: () => void this.submitAndApply(),
            onRemoveOp: (index) => {
                this.session.removeOp(index);
                this.renderPlan();
            },
            onAddEnlarge: (categoryId, radius) => {
                const problem = this.session.addEnlargeOp(categoryId, radius);
                this.serverErrors = problem ? [problem] : [];
                this.renderPlan();
            },
            onBeginPolygon: () => {
                if (this.session.selectedImageId !== null) {
                    this.session.beginPolygon(this.session.selectedImageId);
                    this.renderPlan();
                }
            },
            onCanvasClick: (x, y) => {
                this.session.addPolygonPoint(x, y);
                this.renderPlan();
            },
            onFinishPolygon: (categoryName) => {
                const problem = this.session.finishPolygon(categoryName);
                this.serverErrors = problem ? [problem] : [];
                this.renderPlan();
            },
        }, this.serverErrors);
    }

    async refreshComparison(): Promise<void> {
        try {
            const payload = await this.api.getComparison();
            renderComparison(this.panels.comparison, payload);
        } catch (error) {
            if (error instanceof ApiError && error.status === 404) {
                renderComparison(this.panels.comparison, {
                    categories: [],
                    original: null,
                    enhanced: null,
                    delta: null,
                });
            } else {
                renderOfflineBanner(this.panels.comparison, String(error));
            }
        }
    }

    /** Submit the draft plan, run the apply job, and refresh the tables. */
    async submitAndApply(): Promise<void> {
        const problems = this.session.validatePlan();
        if (problems.length > 0) {
            this.serverErrors = [];
            this.renderPlan();
            return;
        }
        try {
            const planId = await this.api.submitPlan(this.session.planPayload());
            const jobId = await this.api.applyPlan(planId);
            this.session.jobId = jobId;
            this.session.jobStage = "queued";
            this.renderPlan();
            const job = await this.api.waitForJob(jobId);
            this.session.jobStage = job.status === "done" ? "finished" : `failed: ${job.error}`;
            if (job.status === "done") {
                this.session.clearPlan();
                await this.refreshComparison();
                await this.refreshGallery();
            } else {
                this.serverErrors = [job.error ?? "apply job failed"];
            }
        } catch (error) {
            this.serverErrors = [error instanceof ApiError ? error.detail : String(error)];
        } finally {
            this.session.jobId = null;
            this.renderPlan();
        }
    }
}
