import { ComparisonPayload } from "../types.js";

function cell(value: number | null | undefined): string {
    return value === null || value === undefined ? "-" : value.toFixed(2);
}

/** Before/after per-class IoU table, laid out like the usual benchmark table:
 *  one row per model, one column per category, unweighted mean at the end. */
export function renderComparison(container: HTMLElement, payload: ComparisonPayload): void {
    container.innerHTML = "";
    if (!payload.original) {
        const hint = document.createElement("p");
        hint.className = "empty-state";
        hint.textContent = "No trained model yet.";
        container.appendChild(hint);
        return;
    }

    const table = document.createElement("table");
    table.className = "comparison-table";

    const addCell = (row: HTMLTableRowElement, tag: "th" | "td", text: string) => {
        const element = document.createElement(tag);
        element.textContent = text;
        row.appendChild(element);
    };

    const head = document.createElement("tr");
    addCell(head, "th", "Model");
    for (const category of payload.categories) {
        addCell(head, "th", category.name);
    }
    addCell(head, "th", "Overall");
    table.appendChild(head);

    const sides: Array<["Original" | "Enhanced" | "Delta", Record<string, number | null>, number | null]> = [
        ["Original", payload.original.per_class, payload.original.overall],
    ];
    if (payload.enhanced) {
        sides.push(["Enhanced", payload.enhanced.per_class, payload.enhanced.overall]);
    }
    if (payload.delta) {
        sides.push(["Delta", payload.delta, null]);
    }
    for (const [label, perClass, overall] of sides) {
        const row = document.createElement("tr");
        row.dataset.model = label;
        addCell(row, "td", label);
        for (const category of payload.categories) {
            addCell(row, "td", cell(perClass[category.name]));
        }
        addCell(row, "td", overall === null ? "" : cell(overall));
        table.appendChild(row);
    }
    container.appendChild(table);

    if (!payload.enhanced) {
        const note = document.createElement("p");
        note.className = "comparison-note";
        note.textContent = "Apply a plan to train the enhanced model and fill the second row.";
        container.appendChild(note);
    }
}
