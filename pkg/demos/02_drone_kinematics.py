# # Drone kinematics in the NED frame
#
# Positions are north-east-down: +x north, +y east, +z down. Yaw is in degrees,
# clockwise seen from above, and always kept in (-180, 180].

# In[1]:

import math

from gsce.dronesim import Simulator, body_to_world, normalize_yaw

for deg in (190, -180, 540, -725.5):
    print(deg, "->", normalize_yaw(deg))


# Body-frame motion is rotated by the current heading. Facing east (yaw 90),
# "4 m left" in the body frame is 4 m north in the world.

# In[2]:

print(body_to_world(0, -4, 0, 90))
print(body_to_world(1, 0, 0, 30))


# Rotation keeps lengths.

# In[3]:

v = (3.0, -4.0, 12.0)
print(math.hypot(*v), math.hypot(*body_to_world(*v, 123.4)))


# A short flight. Note "up" is negative z, and set_yaw logs the shortest turn.

# In[4]:

sim = Simulator()
sim.takeoff()
start = sim.get_drone_position()
sim.fly_to(start.x, start.y, start.z - 5)
sim.set_yaw(170)
sim.set_yaw(-170)
sim.fly_to(3, 4, sim.get_drone_position().z)
for t in sim.log:
    print(t.as_list())


# The logged deltas always add up to the net displacement.

# In[5]:

end = sim.get_drone_position()
print([round(sum(t.as_list()[i] for t in sim.log), 9) for i in range(3)],
      [end.x - start.x, end.y - start.y, end.z - start.z])
