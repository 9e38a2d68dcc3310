import { UiSession } from "../session.js";
import { CategoryRef, PlanOp } from "../types.js";

export interface PlanHandlers {
    onSubmit(): void;
    onRemoveOp(index: number): void;
    onAddEnlarge(categoryId: number, radius: number): void;
    onCanvasClick(x: number, y: number): void;
    onBeginPolygon(): void;
    onFinishPolygon(categoryName: string): void;
}

function describeOp(op: PlanOp, categories: CategoryRef[]): string {
    const name = (id: number | null | undefined) =>
        categories.find((c) => c.id === id)?.name ?? (id === null || id === undefined ? "?" : `#${id}`);
    if (op.kind === "enlarge") {
        return `Enlarge every "${name(op.category_id)}" annotation by ${op.radius} px`;
    }
    const points = op.polygon ? op.polygon.length / 2 : 0;
    const category = op.category_name ?? name(op.category_id);
    return `Add a ${points}-point "${category}" polygon on image ${op.image_id}`;
}

/** Compose Enlarge ops and hand-drawn AddAnnotation polygons, then submit.
 *  Submission is blocked client-side while the plan fails validation. */
export function renderPlanEditor(
    container: HTMLElement,
    session: UiSession,
    categories: CategoryRef[],
    handlers: PlanHandlers,
    serverErrors: string[] = [],
): void {
    container.innerHTML = "";

    const opsList = document.createElement("ol");
    opsList.className = "plan-ops";
    session.ops.forEach((op, index) => {
        const item = document.createElement("li");
        const text = document.createElement("span");
        text.textContent = describeOp(op, categories);
        const remove = document.createElement("button");
        remove.textContent = "remove";
        remove.className = "remove-op";
        remove.addEventListener("click", () => handlers.onRemoveOp(index));
        item.append(text, remove);
        opsList.appendChild(item);
    });

    const enlargeForm = document.createElement("div");
    enlargeForm.className = "enlarge-form";
    const categorySelect = document.createElement("select");
    for (const category of categories) {
        const option = document.createElement("option");
        option.value = String(category.id);
        option.textContent = category.name;
        categorySelect.appendChild(option);
    }
    const radiusInput = document.createElement("input");
    radiusInput.type = "number";
    radiusInput.min = "0";
    radiusInput.value = "2";
    radiusInput.className = "radius-input";
    const addEnlarge = document.createElement("button");
    addEnlarge.textContent = "add enlarge op";
    addEnlarge.className = "add-enlarge";
    addEnlarge.addEventListener("click", () =>
        handlers.onAddEnlarge(Number(categorySelect.value), Number(radiusInput.value)),
    );
    enlargeForm.append(categorySelect, radiusInput, addEnlarge);

    const drawBar = document.createElement("div");
    drawBar.className = "draw-bar";
    const begin = document.createElement("button");
    begin.textContent = session.polygon ? "drawing..." : "draw polygon";
    begin.className = "begin-polygon";
    begin.disabled = session.selectedImageId === null || session.polygon !== null;
    begin.addEventListener("click", () => handlers.onBeginPolygon());
    const categoryName = document.createElement("input");
    categoryName.type = "text";
    categoryName.placeholder = "category name (e.g. confuser)";
    categoryName.className = "polygon-category";
    const finish = document.createElement("button");
    finish.textContent = "close polygon";
    finish.className = "finish-polygon";
    finish.disabled = session.polygon === null;
    finish.addEventListener("click", () => handlers.onFinishPolygon(categoryName.value));
    const pointCount = document.createElement("span");
    pointCount.className = "point-count";
    pointCount.textContent = session.polygon ? `${session.polygon.points.length} points` : "";
    drawBar.append(begin, categoryName, finish, pointCount);

    const canvas = document.createElement("canvas");
    canvas.className = "draw-canvas";
    canvas.width = 256;
    canvas.height = 256;
    canvas.addEventListener("click", (event) => {
        const rect = canvas.getBoundingClientRect();
        const scaleX = canvas.width / Math.max(rect.width, 1);
        const scaleY = canvas.height / Math.max(rect.height, 1);
        handlers.onCanvasClick((event.clientX - rect.left) * scaleX, (event.clientY - rect.top) * scaleY);
    });

    const problems = document.createElement("ul");
    problems.className = "plan-problems";
    for (const problem of [...session.validatePlan(), ...serverErrors]) {
        const entry = document.createElement("li");
        entry.textContent = problem;
        problems.appendChild(entry);
    }

    const submit = document.createElement("button");
    submit.textContent = "submit plan and retrain";
    submit.className = "submit-plan";
    submit.disabled = session.validatePlan().length > 0 || session.jobId !== null;
    submit.addEventListener("click", () => handlers.onSubmit());

    const jobLine = document.createElement("p");
    jobLine.className = "job-status";
    jobLine.textContent = session.jobId ? `job ${session.jobId}: ${session.jobStage}` : "";

    container.append(opsList, enlargeForm, drawBar, canvas, problems, submit, jobLine);
}
