# # A tour of SkillScript
#
# SkillScript is the small language that generated drone programs are written in.
# One statement per line: an assignment or a skill call. Expressions support
# arithmetic, `pi`, field access on positions and a handful of math functions.

# In[1]:

from gsce.dronesim import Simulator
from gsce.skillscript import interpret, parse, pretty_print

source = """
# climb, then turn right and fly forward 3 m in the body frame
takeoff()
p = get_drone_position()
fly_to(p.x, p.y, p.z - 2)
set_yaw(get_yaw() + 90)
yaw = radians(get_yaw())
p = get_drone_position()
fly_to(p.x + 3 * cos(yaw), p.y + 3 * sin(yaw), p.z)
"""
program = parse(source)
print(pretty_print(program))


# Parsing drops comments and normalizes spacing, so printing and reparsing gives
# back the same tree.

# In[2]:

assert parse(pretty_print(program)) == program


# Running the program moves a simulated drone. Every motion is logged as
# `[dx, dy, dz, dyaw]`; takeoff and land are not.

# In[3]:

sim = Simulator()
outcome = interpret(program, sim)
print(outcome.ok, outcome.steps, "statements")
for t in sim.log:
    print([round(v, 4) for v in t.as_list()])


# Anything outside the closed set of skills is rejected instead of being run.

# In[4]:

for bad in ["takeoff()\nhover(3)", "fly_to(0, 0, -1)", "x = 1 / 0", "fly_to(1, 2"]:
    try:
        result = interpret(parse(bad), Simulator())
        print(f"{bad!r:28} -> {result.category}: {result.error}")
    except Exception as exc:
        print(f"{bad!r:28} -> {exc.category}: {exc}")
