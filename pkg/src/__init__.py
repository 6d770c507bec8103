"""
Flying hand simulator: a quadrotor carrying a delta arm and a three-finger
gripper that grasps an object off a wall.
"""
