# # Evaluating offline with scripted agents
#
# The oracle agent answers every task with a correct program, and the faulty
# agents inject one known mistake each. Together they check the harness end to
# end without any model access.

# In[1]:

import tempfile
from pathlib import Path

from gsce.corpus import default_corpus_path, load_corpus
from gsce.runner import AgentConfig, RunPlan, run_plan
from gsce.scoring import aggregate, read_results, render_report

corpus = load_corpus(default_corpus_path())
print(len(corpus.tasks), "tasks;", sum(t.has_vertical for t in corpus.tasks), "with vertical motion")
print(corpus.tasks[0].query)
print([t.as_list() for t in corpus.tasks[0].ground_truth])


# In[2]:

workdir = Path(tempfile.mkdtemp())
results = []
for kind, fault in [("oracle", None), ("faulty", "flip_z_sign"),
                    ("faulty", "ignore_body_frame"), ("faulty", "emit_prose")]:
    plan = RunPlan(
        corpus_path=str(default_corpus_path()),
        out_path=str(workdir / f"{kind}-{fault}.jsonl"),
        methods=("gsce",),
        repeats=1,
        agent=AgentConfig(kind=kind, fault=fault),
    )
    results += read_results(run_plan(plan))

print(render_report(aggregate(results)))


# Flipping the vertical sign fails exactly the tasks that move up or down.
# Prose-only answers never run.

# In[3]:

for r in results:
    if r.model == "faulty-emit_prose":
        print(r.task_id, r.error_category, r.error_message)
        break
