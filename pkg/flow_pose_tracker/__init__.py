"""
6D object pose and velocity tracking from optical flow, delayed masks and delayed poses.
"""
