"""
Mesh handling and depth rendering for pose-measurement vetting.
"""
from .mesh import TriangleMesh, load_mesh, save_mesh, box_mesh, cylinder_mesh, sample_surface_points
from .rasterizer import render_depth, depth_error, MIN_OVERLAP_PIXELS, NEAR_PLANE
