# Score all five methods with plausibility (EBPG, IoU, BBox) and
# faithfulness (Drop, Increase) over the eval split, then rank them:
# minimal Drop first, Increase, runtime, and EBPG as tie-breaks.
from xaiseg import metrics, model, pipeline, synth

result = synth.generate(synth.SynthConfig(seed=9, image_size=(48, 48), train_count=12, eval_count=4))
xs, ys = pipeline.build_training_arrays(result.train, result.images)
net = model.train_toy(xs, ys, model.TrainConfig(epochs=40, seed=9))

rows = metrics.evaluate_methods(net, result.eval, result.images)
print(pipeline.evaluation_to_csv(rows), end="")

selection = pipeline.select_core_method(rows)
print("ranking:", " > ".join(r.method for r in selection.ranking))
print("core method for the enhancement step:", selection.method)

# The same ranking rule applied to a table with a clear faithfulness winner:
from xaiseg.metrics import EvaluationRow

reference_rows = [
    EvaluationRow("GradCAM", 50.49, 48.39, 47.94, 5.21, 52.57, 3.21),
    EvaluationRow("GradCAM++", 58.13, 52.24, 53.22, 5.17, 54.66, 4.20),
    EvaluationRow("HiResCAM", 60.81, 41.69, 52.19, 5.01, 55.93, 3.13),
    EvaluationRow("XGradCAM", 57.94, 47.81, 53.09, 5.94, 55.01, 4.43),
    EvaluationRow("ScoreCAM", 54.01, 43.95, 51.94, 7.34, 47.19, 52.50),
]
print("winner on that table:", pipeline.select_core_method(reference_rows).method)
