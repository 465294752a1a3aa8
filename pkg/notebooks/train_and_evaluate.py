"""
Training the three classifiers and the vote
===========================================

A synthetic corpus of flow features is split, the decision tree, logistic
model and Bayesian network are trained, and each is scored on the held-out
part alongside their majority vote.
"""

# a corpus of 1292 labelled flows from two separated traffic profiles
import numpy as np
from skypesiem.learnkit import stratified_split
from skypesiem.synth import synthetic_corpus
ds = synthetic_corpus(1292, seed=0)
print(len(ds), "flows;", ds.class_counts().tolist(), "Skype/Normal")

# two thirds for training, stratified by class
train, test = stratified_split(ds, 2 / 3, seed=0)

# train all three models
from skypesiem.classifiers import train_all
models = train_all(train)
print("tree depth", models["tree"].depth, "leaves", models["tree"].n_leaves)
print("network parents", models["bayesnet"].parents)

# per-model and ensemble report in the usual table layout
from skypesiem.metrics import classification_report, format_report, report_rows, roc_auc
from skypesiem.voting import Ensemble
rows = []
for name, m in models.items():
    P = m.predict_proba(test.X)
    rep = classification_report(test.y, m.predict_labels(test.X), P)
    rows += report_rows(name, rep, roc_auc(test.y, P[:, 0]).auc)
labels, votes, scores = Ensemble(models).decide_many(test.X)
rep = classification_report(test.y, labels, np.column_stack([scores, 1 - scores]))
rows += report_rows("Majority vote", rep, roc_auc(test.y, scores).auc)
print(format_report(rows))

# the ensemble AUC on held-out data becomes the runtime detection threshold
from skypesiem.metrics import calibrate_threshold
print(calibrate_threshold(test, models))
