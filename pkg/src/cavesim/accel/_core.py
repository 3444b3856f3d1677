"""Scalar kernel bodies shared by both backends.

Every function here is written in nopython-compatible style (scalar math,
flat float64 arrays, no allocation besides the caller-provided output) so the
JIT backend can compile the exact same bytecode the plain-Python fallback
runs. Transcendentals are evaluated by the caller and passed in: libm and
compiled math can disagree by an ulp on some arguments, while +, -, *, /,
abs, floor and ceil are exactly rounded everywhere. With sin/cos supplied,
the kernels stay bit-identical across backends by construction.
"""

import math

GRAVITY = 9.80665
TWO_PI = 2.0 * math.pi


def wrap_angle_scalar(a):
    """Wrap an angle to (-pi, pi]."""
    return a - TWO_PI * math.ceil((a - math.pi) / TWO_PI)


def step_body(s, wrench, par, trig, cur, dt, out):
    """One semi-implicit Euler step of the 6-DOF rigid body.

    s: state vector (13,) = x, y, z, roll, pitch, yaw, vx, vy, vz (world),
       wx, wy, wz (body rates), t.  World frame has z positive down; body
       frame is x forward, y starboard, z down.
    wrench: (4,) = surge force, heave force, roll torque, yaw channel.
       The yaw channel is port-turn-positive, so body torque about z is
       its negation.
    par: (14,) = mass, buoyancy_force, cob offset xyz, linear drag xyz,
       angular drag xyz, inertia xyz.
    trig: (6,) = cos/sin of roll, cos/sin of pitch, cos/sin of yaw for
       the attitude in s, evaluated by the caller (see module docstring).
    cur: (3,) water current velocity in the world frame, already sampled
       at the current time.
    out: (13,) output state.

    Quadratic drag acts per body axis on velocity relative to the current.
    Gyroscopic coupling and added mass are neglected; the model is meant
    for slow near-hover flight, not aggressive maneuvers.
    """
    phi = s[3]
    th = s[4]
    psi = s[5]
    vx = s[6]
    vy = s[7]
    vz = s[8]
    wx = s[9]
    wy = s[10]
    wz = s[11]

    mass = par[0]
    buoy = par[1]
    cbx = par[2]
    cby = par[3]
    cbz = par[4]
    kx = par[5]
    ky = par[6]
    kz = par[7]
    kax = par[8]
    kay = par[9]
    kaz = par[10]
    ix = par[11]
    iy = par[12]
    iz = par[13]

    cph = trig[0]
    sph = trig[1]
    cth = trig[2]
    sth = trig[3]
    cps = trig[4]
    sps = trig[5]

    # body-to-world rotation, intrinsic ZYX
    r00 = cps * cth
    r01 = cps * sth * sph - sps * cph
    r02 = cps * sth * cph + sps * sph
    r10 = sps * cth
    r11 = sps * sth * sph + cps * cph
    r12 = sps * sth * cph - cps * sph
    r20 = -sth
    r21 = cth * sph
    r22 = cth * cph

    # velocity relative to the water, expressed in the body frame
    rvx = vx - cur[0]
    rvy = vy - cur[1]
    rvz = vz - cur[2]
    bvx = r00 * rvx + r10 * rvy + r20 * rvz
    bvy = r01 * rvx + r11 * rvy + r21 * rvz
    bvz = r02 * rvx + r12 * rvy + r22 * rvz

    # thrust + quadratic drag, body frame
    fbx = wrench[0] - kx * abs(bvx) * bvx
    fby = -ky * abs(bvy) * bvy
    fbz = wrench[1] - kz * abs(bvz) * bvz

    # world frame: rotate body forces, add weight and buoyancy on world z
    fgx = r00 * fbx + r01 * fby + r02 * fbz
    fgy = r10 * fbx + r11 * fby + r12 * fbz
    fgz = r20 * fbx + r21 * fby + r22 * fbz + mass * GRAVITY - buoy

    # buoyancy acts at the center of buoyancy, offset from the center of
    # mass, which produces the restoring torque; express the (upward)
    # buoyant force in body coordinates first
    bfx = -r20 * buoy
    bfy = -r21 * buoy
    bfz = -r22 * buoy
    tqx = wrench[2] + (cby * bfz - cbz * bfy) - kax * abs(wx) * wx
    tqy = (cbz * bfx - cbx * bfz) - kay * abs(wy) * wy
    tqz = -wrench[3] + (cbx * bfy - cby * bfx) - kaz * abs(wz) * wz

    # semi-implicit Euler: velocities first, then pose from new velocities
    nvx = vx + dt * fgx / mass
    nvy = vy + dt * fgy / mass
    nvz = vz + dt * fgz / mass
    nwx = wx + dt * tqx / ix
    nwy = wy + dt * tqy / iy
    nwz = wz + dt * tqz / iz

    out[0] = s[0] + dt * nvx
    out[1] = s[1] + dt * nvy
    out[2] = s[2] + dt * nvz

    # Euler-angle kinematics from the updated body rates
    tth = sth / cth
    dphi = nwx + (nwy * sph + nwz * cph) * tth
    dth = nwy * cph - nwz * sph
    dpsi = (nwy * sph + nwz * cph) / cth

    # wrap kept inline so the whole body stays one compilable unit
    a = phi + dt * dphi
    out[3] = a - TWO_PI * math.ceil((a - math.pi) / TWO_PI)
    a = th + dt * dth
    out[4] = a - TWO_PI * math.ceil((a - math.pi) / TWO_PI)
    a = psi + dt * dpsi
    out[5] = a - TWO_PI * math.ceil((a - math.pi) / TWO_PI)
    out[6] = nvx
    out[7] = nvy
    out[8] = nvz
    out[9] = nwx
    out[10] = nwy
    out[11] = nwz
    out[12] = s[12] + dt
    return out
