"""Pure-Python raycast kernel; the compiled twin mirrors this arithmetic exactly.

Any change here must be copied verbatim into _raycast_cy.pyx so both backends
stay bit-identical.
"""

from __future__ import annotations

from math import floor

_INF = float("inf")


def render_kernel(
    occ,
    tex,
    x0,
    y0,
    dir_x,
    dir_y,
    cos_off,
    palette,
    camera_height,
    horizon,
    inv_g0,
    inv_g1,
    inv_g2,
    wall_scale,
    shade_k,
    side_factor,
    floor_r,
    floor_g,
    floor_b,
    ceil_r,
    ceil_g,
    ceil_b,
    out_pixels,
    out_dist,
    out_height,
    out_tex,
    out_side,
):
    n_cols = out_dist.shape[0]
    n_rows = out_pixels.shape[1]
    max_steps = 4 * (occ.shape[0] + occ.shape[1])
    for c in range(n_cols):
        rdx = dir_x[c]
        rdy = dir_y[c]
        map_x = int(floor(x0))
        map_y = int(floor(y0))
        delta_x = _INF if rdx == 0.0 else abs(1.0 / rdx)
        delta_y = _INF if rdy == 0.0 else abs(1.0 / rdy)
        if rdx < 0.0:
            step_x = -1
            side_x = (x0 - map_x) * delta_x
        else:
            step_x = 1
            side_x = (map_x + 1.0 - x0) * delta_x
        if rdy < 0.0:
            step_y = -1
            side_y = (y0 - map_y) * delta_y
        else:
            step_y = 1
            side_y = (map_y + 1.0 - y0) * delta_y

        t = 0.0
        side = 0
        for _ in range(max_steps):
            if side_x < side_y:
                t = side_x
                side_x += delta_x
                map_x += step_x
                side = 0
            else:
                t = side_y
                side_y += delta_y
                map_y += step_y
                side = 1
            if occ[map_y, map_x]:
                break

        dist = t * cos_off[c]
        if dist < 1e-9:
            dist = 1e-9
        h_wall = wall_scale / dist
        tex_id = tex[map_y, map_x]
        shade = 1.0 / (1.0 + shade_k * dist)
        if side == 1:
            shade *= side_factor
        wr = palette[tex_id, 0] * shade
        wg = palette[tex_id, 1] * shade
        wb = palette[tex_id, 2] * shade
        top = horizon - (1.0 - camera_height) * h_wall
        bot = horizon + camera_height * h_wall

        out_dist[c] = dist
        out_height[c] = h_wall
        out_tex[c] = tex_id
        out_side[c] = side

        for y in range(n_rows):
            yc = y + 0.5
            if yc < top:
                pr, pg, pb = ceil_r, ceil_g, ceil_b
            elif yc < bot:
                pr, pg, pb = wr, wg, wb
            else:
                pr, pg, pb = floor_r, floor_g, floor_b
            out_pixels[0, y, c] = pr**inv_g0
            out_pixels[1, y, c] = pg**inv_g1
            out_pixels[2, y, c] = pb**inv_g2
