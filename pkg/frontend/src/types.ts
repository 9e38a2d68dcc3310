export type MethodKey = "gradcam" | "gradcam_pp" | "hirescam" | "xgradcam" | "scorecam";

export const METHOD_KEYS: MethodKey[] = ["gradcam", "gradcam_pp", "hirescam", "xgradcam", "scorecam"];

export const METHOD_LABELS: Record<MethodKey, string> = {
    gradcam: "GradCAM",
    gradcam_pp: "GradCAM++",
    hirescam: "HiResCAM",
    xgradcam: "XGradCAM",
    scorecam: "ScoreCAM",
};

export interface ImageEntry {
    id: number;
    file_name: string;
    width: number;
    height: number;
    iou: number | null;
}

export interface EvaluationRowJson {
    method: string;
    ebpg: number | null;
    bbox: number | null;
    iou: number | null;
    drop: number | null;
    increase: number | null;
    time_s: number;
    samples: number;
    undefined: Record<string, number>;
}

export interface MethodsPayload {
    rows: EvaluationRowJson[];
    chosen: string;
    ranking: string[];
}

export interface CategoryRef {
    id: number;
    name: string;
}

export interface ComparisonSide {
    per_class: Record<string, number | null>;
    overall: number;
    per_image: Record<string, number | null>;
}

export interface ComparisonPayload {
    categories: CategoryRef[];
    original: ComparisonSide | null;
    enhanced: ComparisonSide | null;
    delta: Record<string, number | null> | null;
}

export interface AnnotationsPayload {
    image: { id: number; width: number; height: number };
    categories: CategoryRef[];
    annotations: Array<{
        id: number;
        category_id: number;
        segmentation: unknown;
        bbox: number[];
        area: number;
    }>;
}

export interface EnlargePlanOp {
    kind: "enlarge";
    category_id: number;
    radius: number;
    rationale?: string;
}

export interface AddPlanOp {
    kind: "add";
    image_id: number;
    category_id?: number | null;
    category_name?: string | null;
    polygon?: number[] | null;
    rle?: unknown;
    rationale?: string;
}

export type PlanOp = EnlargePlanOp | AddPlanOp;

export interface PlanPayload {
    ops: PlanOp[];
    author?: string;
    timestamp?: string;
}

export interface JobStatus {
    id: string;
    status: "pending" | "running" | "done" | "error";
    stage: string;
    error: string | null;
}
