# # Recording and replaying responses
#
# Any agent can be wrapped so its responses are written to a JSON-lines cache.
# A replay agent then serves the same answers without network access, which
# makes reruns byte-for-byte reproducible.

# In[1]:

import tempfile
from pathlib import Path

from gsce.corpus import default_corpus_path, load_corpus
from gsce.llmclient import ChatRequest, OracleAgent, ReplayAgent, ResponseCache, cache_key, recording

workdir = Path(tempfile.mkdtemp())
corpus = load_corpus(default_corpus_path())
cache = ResponseCache(workdir / "cache")
agent = recording(OracleAgent(corpus), cache)

request = ChatRequest(system_text="(prompt)", user_text=corpus.tasks[3].query, model="oracle")
print(cache_key(request))
print(agent.complete(request))


# The key covers every request field, including the repeat index, so repeated
# samples of one prompt are stored separately.

# In[2]:

again = ChatRequest(system_text="(prompt)", user_text=corpus.tasks[3].query, model="oracle", repeat_index=1)
print(cache_key(again) != cache_key(request))


# In[3]:

replay = ReplayAgent(ResponseCache(workdir / "cache"))
print(replay.complete(request) == agent.complete(request))
try:
    replay.complete(again)
except Exception as exc:
    print(type(exc).__name__, exc)

print((workdir / "cache" / "responses.jsonl").read_text()[:200])
