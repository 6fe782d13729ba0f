from .contour import (
    INITIAL_RADIUS,
    as_contour,
    clamp01,
    densify_contour,
    initial_contour,
    perimeter,
    polygon_centroid,
    resample_contour,
    shift_contour,
    signed_area,
)
from .raster import mask_iou, point_in_polygon, points_in_polygon, rasterize_polygon
