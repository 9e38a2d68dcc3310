# The whole human-in-the-loop story at desk scale: train on under-sized
# annotations, apply the expert plan (enlarge cable masks, annotate the
# confusers), retrain, and compare per-class IoU on identical eval GT.
from pathlib import Path

from xaiseg import pipeline

cfg = pipeline.RunConfig(
    out_dir=str(Path("/tmp/xaiseg_demo_loop")),
    seed=1,
    image_size=(48, 48),
    train_count=16,
    eval_count=6,
    epochs=50,
)

pipeline.run_synth(cfg)
pipeline.run_train(cfg)
rows = pipeline.run_eval_xai(cfg)
print("chosen method:", pipeline.select_core_method(rows).method)

# The default plan stands in for the expert session: one Enlarge(cable, 2)
# op plus one AddAnnotation per unlabeled confuser from truth.json.
pipeline.run_augment(cfg, auto_default=True)
pipeline.run_retrain(cfg)
report = pipeline.run_compare(cfg)

print()
print(pipeline.comparison_to_csv(report), end="")
print()
for cid, name in report.categories:
    delta = report.delta()[cid]
    print(f"{name:>9}: {report.original[cid]:6.2f} -> {report.enhanced[cid]:6.2f}  ({delta:+.2f})")
print(f"{'overall':>9}: {report.overall('original'):6.2f} -> {report.overall('enhanced'):6.2f}")
