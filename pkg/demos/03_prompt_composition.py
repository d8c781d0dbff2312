# # Composing prompts
#
# A prompt is built from up to four sections: guidelines, skill API docs,
# constraints and worked examples. Four presets switch the last two on and off.

# In[1]:

from gsce.prompt import METHODS, compose_default, load_example_library, load_texts, preset

library = load_example_library()
texts = load_texts()
query = "Turn 90 degrees clockwise, then fly 4 meters left in the drone's body frame."

for method in METHODS:
    bundle = compose_default(preset(method), query, library, texts)
    m = bundle.section_manifest
    print(f"{method:12} constraints={m['constraints']!s:5} examples={m['examples']!s:5} "
          f"k={m['k']} chars={len(bundle.system_text)}")


# The constraint section is a list of tagged rules. Each example in the library
# declares which rules it demonstrates.

# In[2]:

print(texts.constraint_ids)
for entry in library[:3]:
    print(entry.id, entry.constraints_covered)


# With reasoning enabled, example code keeps its comment lines; without it they
# are stripped and nothing else changes.

# In[3]:

full = compose_default(preset("gsce", k=1, cot=True), query, library, texts)
bare = compose_default(preset("gsce", k=1, cot=False), query, library, texts)
print(full.system_text.split("### Example 1")[1])
print(bare.system_text.split("### Example 1")[1])


# The user message is always the query, untouched.

# In[4]:

print(full.messages()[1])
