# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled raycast kernel; arithmetic mirrors _raycast_py.py exactly."""

from libc.math cimport INFINITY, fabs, floor, pow


def render_kernel(
    const unsigned char[:, ::1] occ,
    const int[:, ::1] tex,
    double x0,
    double y0,
    const double[::1] dir_x,
    const double[::1] dir_y,
    const double[::1] cos_off,
    const double[:, ::1] palette,
    double camera_height,
    double horizon,
    double inv_g0,
    double inv_g1,
    double inv_g2,
    double wall_scale,
    double shade_k,
    double side_factor,
    double floor_r,
    double floor_g,
    double floor_b,
    double ceil_r,
    double ceil_g,
    double ceil_b,
    double[:, :, ::1] out_pixels,
    double[::1] out_dist,
    double[::1] out_height,
    int[::1] out_tex,
    int[::1] out_side,
):
    cdef Py_ssize_t n_cols = out_dist.shape[0]
    cdef Py_ssize_t n_rows = out_pixels.shape[1]
    cdef int max_steps = 4 * (occ.shape[0] + occ.shape[1])
    cdef Py_ssize_t c, y
    cdef int map_x, map_y, step_x, step_y, side, tex_id, i
    cdef double rdx, rdy, delta_x, delta_y, side_x, side_y, t, dist
    cdef double h_wall, shade, wr, wg, wb, top, bot, yc, pr, pg, pb

    for c in range(n_cols):
        rdx = dir_x[c]
        rdy = dir_y[c]
        map_x = <int>floor(x0)
        map_y = <int>floor(y0)
        delta_x = INFINITY if rdx == 0.0 else fabs(1.0 / rdx)
        delta_y = INFINITY if rdy == 0.0 else fabs(1.0 / rdy)
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
        for i in range(max_steps):
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
                pr = ceil_r
                pg = ceil_g
                pb = ceil_b
            elif yc < bot:
                pr = wr
                pg = wg
                pb = wb
            else:
                pr = floor_r
                pg = floor_g
                pb = floor_b
            out_pixels[0, y, c] = pow(pr, inv_g0)
            out_pixels[1, y, c] = pow(pg, inv_g1)
            out_pixels[2, y, c] = pow(pb, inv_g2)
