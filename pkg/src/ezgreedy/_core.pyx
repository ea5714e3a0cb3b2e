# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled rollout kernels.

Mirrors ``ezgreedy._fallback`` function by function, including the order in
which random numbers are drawn, so both backends produce the same
trajectories from the same stream.
"""

import numpy as np

from libc.math cimport cos, sin, sqrt, log, atan2, fabs, M_PI, isfinite, NAN
from libc.stdint cimport uint64_t, int64_t, uint8_t, uint32_t


# ---------------------------------------------------------------- rng

ctypedef struct Rng:
    uint64_t s0, s1, s2, s3


cdef inline uint64_t _rotl(uint64_t x, int k) noexcept nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t rng_next(Rng* r) noexcept nogil:
    cdef uint64_t result = _rotl(r.s1 * 5, 7) * 9
    cdef uint64_t t = r.s1 << 17
    r.s2 ^= r.s0
    r.s3 ^= r.s1
    r.s1 ^= r.s2
    r.s0 ^= r.s3
    r.s2 ^= t
    r.s3 = _rotl(r.s3, 45)
    return result


cdef inline double rng_double(Rng* r) noexcept nogil:
    return <double>(rng_next(r) >> 11) * (1.0 / 9007199254740992.0)


cdef inline int64_t rng_int(Rng* r, int64_t n) noexcept nogil:
    cdef int64_t k = <int64_t>(rng_double(r) * n)
    return k if k < n else n - 1


cdef inline double rng_normal(Rng* r) noexcept nogil:
    cdef double u1 = 1.0 - rng_double(r)
    cdef double u2 = rng_double(r)
    return sqrt(-2.0 * log(u1)) * cos(2.0 * M_PI * u2)


cdef Rng rng_load(object py_rng):
    cdef Rng r
    st = py_rng.state
    r.s0 = <uint64_t>int(st[0])
    r.s1 = <uint64_t>int(st[1])
    r.s2 = <uint64_t>int(st[2])
    r.s3 = <uint64_t>int(st[3])
    return r


cdef void rng_store(Rng* r, object py_rng):
    py_rng.state = [int(r.s0), int(r.s1), int(r.s2), int(r.s3)]


# ---------------------------------------------------------------- explorer

ctypedef struct Explorer:
    double eps
    const double* cdf
    int64_t cap
    int literal
    int64_t action
    int64_t remaining
    int64_t steps
    int64_t options_started
    int64_t option_steps
    Rng rng


cdef inline int64_t greedy(const double* q, int64_t A, Rng* rng) noexcept nogil:
    cdef double best = q[0]
    cdef int64_t count = 1, i, pick
    for i in range(1, A):
        if q[i] > best:
            best = q[i]
            count = 1
        elif q[i] == best:
            count += 1
    if count == 1:
        for i in range(A):
            if q[i] == best:
                return i
    pick = rng_int(rng, count)
    for i in range(A):
        if q[i] == best:
            if pick == 0:
                return i
            pick -= 1
    return A - 1


cdef inline int64_t argmax_first(const double* q, int64_t A) noexcept nogil:
    cdef int64_t i, best = 0
    for i in range(1, A):
        if q[i] > q[best]:
            best = i
    return best


cdef inline int64_t duration(Explorer* ex, double u) noexcept nogil:
    # first index with cdf > u (searchsorted side="right")
    cdef int64_t lo = 0, hi = ex.cap, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if ex.cdf[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    if lo > ex.cap - 1:
        lo = ex.cap - 1
    return lo + 1


cdef inline int64_t select(Explorer* ex, const double* q, int64_t A) noexcept nogil:
    cdef int64_t n, a, rem
    ex.steps += 1
    if ex.remaining > 0:
        ex.remaining -= 1
        ex.option_steps += 1
        return ex.action
    if rng_double(&ex.rng) < ex.eps:
        n = duration(ex, rng_double(&ex.rng))
        a = rng_int(&ex.rng, A)
        rem = n if ex.literal else n - 1
        ex.action = a
        ex.remaining = rem
        ex.options_started += 1
        ex.option_steps += 1
        return a
    return greedy(q, A, &ex.rng)


cdef class _ExplorerHandle:
    """Keeps the cdf buffer alive while a kernel runs."""
    cdef Explorer ex
    cdef const double[::1] cdf
    cdef object py

    def __init__(self, explorer):
        self.py = explorer
        self.cdf = np.ascontiguousarray(explorer.duration_dist.cdf_table, dtype=np.float64)
        self.ex.eps = explorer.epsilon
        self.ex.cdf = &self.cdf[0]
        self.ex.cap = self.cdf.shape[0]
        self.ex.literal = 1 if explorer.pseudocode_literal else 0
        opt = explorer.active_option
        if opt is None:
            self.ex.action = 0
            self.ex.remaining = 0
        else:
            self.ex.action = opt.action
            self.ex.remaining = opt.remaining
        self.ex.steps = 0
        self.ex.options_started = 0
        self.ex.option_steps = 0
        self.ex.rng = rng_load(explorer.rng)

    cdef void store(self):
        rng_store(&self.ex.rng, self.py.rng)
        self.py.steps += self.ex.steps
        self.py.options_started += self.ex.options_started
        self.py.option_steps += self.ex.option_steps
        self.py.active_option = None


# ---------------------------------------------------------------- tabular

def q_learning(model, double[:, ::1] table, explorer, double alpha, double gamma,
               int64_t episodes, int64_t eval_every=0, bint stop_on_goal=False):
    cdef int64_t[:, ::1] nxt = np.ascontiguousarray(model.next_state, dtype=np.int64)
    cdef double[:, ::1] rew = np.ascontiguousarray(model.reward, dtype=np.float64)
    cdef uint8_t[:, ::1] term = np.ascontiguousarray(model.terminal, dtype=np.uint8)
    cdef int64_t A = nxt.shape[1], start = model.start, max_steps = model.max_steps
    out = np.full((episodes, 5), NAN, dtype=np.float64)
    cdef double[:, ::1] rows = out
    cdef _ExplorerHandle h = _ExplorerHandle(explorer)
    cdef Explorer* ex = &h.ex
    cdef int64_t ep, s, s2, a, b, steps, done_eps = 0
    cdef double r, target, m, ret, disc, g, gret
    cdef bint t, goal

    with nogil:
        for ep in range(episodes):
            s = start
            ret = 0.0
            disc = 0.0
            g = 1.0
            steps = 0
            goal = False
            while True:
                a = select(ex, &table[s, 0], A)
                s2 = nxt[s, a]
                r = rew[s, a]
                t = term[s, a] != 0
                if t:
                    target = r
                else:
                    m = table[s2, 0]
                    for b in range(1, A):
                        if table[s2, b] > m:
                            m = table[s2, b]
                    target = r + gamma * m
                table[s, a] += alpha * (target - table[s, a])
                ret += r
                disc += g * r
                g *= gamma
                steps += 1
                if r > 0:
                    goal = True
                s = s2
                if t or steps >= max_steps:
                    break
            ex.remaining = 0
            rows[ep, 0] = ret
            rows[ep, 1] = disc
            rows[ep, 2] = steps
            rows[ep, 3] = 1.0 if goal else 0.0
            if eval_every > 0 and (ep + 1) % eval_every == 0:
                s = start
                gret = 0.0
                steps = 0
                while True:
                    a = argmax_first(&table[s, 0], A)
                    gret += rew[s, a]
                    t = term[s, a] != 0
                    s = nxt[s, a]
                    steps += 1
                    if t or steps >= max_steps:
                        break
                rows[ep, 4] = gret
            done_eps = ep + 1
            if stop_on_goal and goal:
                break
    h.store()
    return out[:done_eps]


def select_actions(explorer, q_row, int64_t steps, int64_t episode_length=0):
    """Run the controller against a fixed action-value row.

    Returns the chosen actions and, per step, where each came from: 0 the
    greedy branch, 1 the first step of an exploratory option, 2 a later
    step of one. With ``episode_length > 0`` any running option is dropped
    every ``episode_length`` steps.
    """
    q_arr = np.ascontiguousarray(q_row, dtype=np.float64)
    cdef double[::1] q = q_arr
    cdef int64_t A = q.shape[0]
    if A == 0:
        from .exploration import EmptyActionValues
        raise EmptyActionValues("q_row is empty")
    acts_arr = np.empty(steps, dtype=np.int64)
    src_arr = np.empty(steps, dtype=np.uint8)
    cdef int64_t[::1] acts = acts_arr
    cdef uint8_t[::1] src = src_arr
    cdef _ExplorerHandle h = _ExplorerHandle(explorer)
    cdef Explorer* ex = &h.ex
    cdef int64_t t, started, emitted, ep_t = 0
    with nogil:
        for t in range(steps):
            started = ex.options_started
            emitted = ex.option_steps
            acts[t] = select(ex, &q[0], A)
            if ex.options_started != started:
                src[t] = 1
            elif ex.option_steps != emitted:
                src[t] = 2
            else:
                src[t] = 0
            ep_t += 1
            if episode_length > 0 and ep_t >= episode_length:
                ex.remaining = 0
                ep_t = 0
    h.store()
    return acts_arr, src_arr


def explore_tabular(model, explorer, greedy_actions, int64_t steps, bint stop_when_covered=False):
    cdef int64_t[:, ::1] nxt = np.ascontiguousarray(model.next_state, dtype=np.int64)
    cdef uint8_t[:, ::1] term = np.ascontiguousarray(model.terminal, dtype=np.uint8)
    cdef int64_t S = nxt.shape[0], A = nxt.shape[1]
    cdef int64_t start = model.start, max_steps = model.max_steps
    cdef int64_t pairs_left = int(model.pair_mask().sum())
    first_state_arr = np.full(S, -1, dtype=np.int64)
    first_pair_arr = np.full((S, A), -1, dtype=np.int64)
    cdef int64_t[::1] first_state = first_state_arr
    cdef int64_t[:, ::1] first_pair = first_pair_arr
    cdef bint use_greedy = greedy_actions is not None
    cdef int64_t[::1] gact = np.ascontiguousarray(
        greedy_actions if use_greedy else np.zeros(S, dtype=np.int64), dtype=np.int64)
    q_arr = np.zeros(A, dtype=np.float64)
    cdef double[::1] q = q_arr
    cdef _ExplorerHandle h = _ExplorerHandle(explorer)
    cdef Explorer* ex = &h.ex
    cdef int64_t s, s2, a, t = 0, ep_t = 0, prev = -1
    cdef bint done

    with nogil:
        s = start
        first_state[s] = 0
        while t < steps:
            if stop_when_covered and pairs_left == 0:
                break
            if use_greedy:
                if prev >= 0:
                    q[prev] = 0.0
                prev = gact[s]
                q[prev] = 1.0
            a = select(ex, &q[0], A)
            if first_pair[s, a] < 0:
                first_pair[s, a] = t
                pairs_left -= 1
            s2 = nxt[s, a]
            done = term[s, a] != 0
            t += 1
            ep_t += 1
            if first_state[s2] < 0:
                first_state[s2] = t
            if done or ep_t >= max_steps:
                ex.remaining = 0
                s2 = start
                ep_t = 0
            s = s2
    h.store()
    return first_state_arr, first_pair_arr, t


def coverage_bfs(model, options, double epsilon, greedy_actions, int64_t truncation):
    cdef int64_t[:, ::1] nxt = np.ascontiguousarray(model.next_state, dtype=np.int64)
    cdef uint8_t[:, ::1] term = np.ascontiguousarray(model.terminal, dtype=np.uint8)
    cdef int64_t S = nxt.shape[0], A = nxt.shape[1], start = model.start
    cdef int64_t T = 1, j, B
    for o in options:
        if o.length is not None and o.length > T:
            T = o.length
    lengths_arr = np.zeros((A, T + 1), dtype=np.uint8)
    beta_a, beta_v = [], []
    for o in options:
        if o.length is not None:
            lengths_arr[o.action, o.length] = 1
        else:
            beta_a.append(o.action)
            beta_v.append(o.beta)
    B = len(beta_a)
    cdef uint8_t[:, ::1] lengths = lengths_arr
    cdef int64_t[::1] bact = np.array(beta_a + [0], dtype=np.int64)
    cdef double[::1] bval = np.array(beta_v + [0.0], dtype=np.float64)
    cdef bint use_greedy = greedy_actions is not None
    cdef int64_t[::1] gact = np.ascontiguousarray(
        greedy_actions if use_greedy else np.zeros(S, dtype=np.int64), dtype=np.int64)
    cdef int64_t base_exact = S
    cdef int64_t base_beta = S + S * A * (T - 1)
    cdef int64_t N = base_beta + S * B
    visited_arr = np.zeros(N, dtype=np.uint8)
    queue_arr = np.empty(N, dtype=np.int64)
    reach_arr = np.zeros((S, A), dtype=np.uint8)
    cdef uint8_t[::1] visited = visited_arr
    cdef int64_t[::1] queue = queue_arr
    cdef uint8_t[:, ::1] reach = reach_arr
    cdef int64_t head = 0, tail = 0, node, s, a, r, n, k, s2, rest

    with nogil:
        visited[start] = 1
        queue[tail] = start
        tail += 1
        while head < tail:
            node = queue[head]
            head += 1
            if node < base_exact:
                s = node
                if epsilon < 1.0:
                    for a in range(A):
                        if use_greedy and a != gact[s]:
                            continue
                        reach[s, a] = 1
                        k = start if term[s, a] else nxt[s, a]
                        if not visited[k]:
                            visited[k] = 1
                            queue[tail] = k
                            tail += 1
                if epsilon > 0.0:
                    for a in range(A):
                        for n in range(1, T + 1):
                            if not lengths[a, n]:
                                continue
                            reach[s, a] = 1
                            if term[s, a]:
                                k = start
                            elif n == 1:
                                k = nxt[s, a]
                            else:
                                k = base_exact + (nxt[s, a] * A + a) * (T - 1) + (n - 2)
                            if not visited[k]:
                                visited[k] = 1
                                queue[tail] = k
                                tail += 1
                    for j in range(B):
                        a = bact[j]
                        reach[s, a] = 1
                        if term[s, a]:
                            k = start
                            if not visited[k]:
                                visited[k] = 1
                                queue[tail] = k
                                tail += 1
                            continue
                        s2 = nxt[s, a]
                        if bval[j] > 0.0 and not visited[s2]:
                            visited[s2] = 1
                            queue[tail] = s2
                            tail += 1
                        k = base_beta + s2 * B + j
                        if bval[j] < 1.0 and not visited[k]:
                            visited[k] = 1
                            queue[tail] = k
                            tail += 1
            elif node < base_beta:
                rest = node - base_exact
                r = rest % (T - 1) + 1
                rest = rest // (T - 1)
                a = rest % A
                s = rest // A
                reach[s, a] = 1
                if term[s, a]:
                    k = start
                elif r == 1:
                    k = nxt[s, a]
                else:
                    k = base_exact + (nxt[s, a] * A + a) * (T - 1) + (r - 2)
                if not visited[k]:
                    visited[k] = 1
                    queue[tail] = k
                    tail += 1
            else:
                rest = node - base_beta
                j = rest % B
                s = rest // B
                a = bact[j]
                reach[s, a] = 1
                if term[s, a]:
                    k = start
                    if not visited[k]:
                        visited[k] = 1
                        queue[tail] = k
                        tail += 1
                    continue
                s2 = nxt[s, a]
                if bval[j] > 0.0 and not visited[s2]:
                    visited[s2] = 1
                    queue[tail] = s2
                    tail += 1
                k = base_beta + s2 * B + j
                if bval[j] < 1.0 and not visited[k]:
                    visited[k] = 1
                    queue[tail] = k
                    tail += 1
    return reach_arr.astype(bool)


# ---------------------------------------------------------------- continuous control

ctypedef struct Control:
    int kind            # 0 mountain car, 1 cartpole
    int64_t max_steps
    double start_p, start_v
    # cartpole
    double mc, mp, hl, grav, force, dt, rail, jitter
    int64_t substeps
    bint use_jitter
    double x, th, xd, thd
    int64_t t
    Rng rng


cdef Control control_load(env):
    cdef Control c
    c.kind = env.kind_code
    c.max_steps = env.max_episode_steps
    c.t = 0
    c.x = c.th = c.xd = c.thd = 0.0
    c.use_jitter = False
    if c.kind == 0:
        c.start_p, c.start_v = env.start
    else:
        prm = env.params
        c.mc, c.mp, c.hl, c.grav = prm.cart_mass, prm.pole_mass, prm.half_length, prm.gravity
        c.force, c.dt, c.substeps, c.rail, c.jitter = prm.force, prm.dt, prm.substeps, prm.rail, prm.jitter
        c.use_jitter = env.jitter
        if c.use_jitter:
            c.rng = rng_load(env.rng)
    return c


cdef void control_store(Control* c, env):
    if c.kind == 1 and c.use_jitter:
        rng_store(&c.rng, env.rng)


cdef inline void control_reset(Control* c, double* obs) noexcept nogil:
    c.t = 0
    if c.kind == 0:
        c.x = c.start_p
        c.xd = c.start_v
        obs[0] = c.x
        obs[1] = c.xd
    else:
        c.x = 0.0
        c.th = M_PI
        c.xd = 0.0
        c.thd = 0.0
        if c.use_jitter:
            c.x += c.jitter * rng_normal(&c.rng)
            c.th += c.jitter * rng_normal(&c.rng)
            c.xd += c.jitter * rng_normal(&c.rng)
            c.thd += c.jitter * rng_normal(&c.rng)
        cartpole_obs(c, obs)


cdef inline void cartpole_obs(Control* c, double* obs) noexcept nogil:
    obs[0] = c.x
    obs[1] = cos(c.th)
    obs[2] = sin(c.th)
    obs[3] = c.xd
    obs[4] = c.thd


cdef inline double control_step(Control* c, int64_t action, double* obs,
                                bint* terminal, bint* truncated) noexcept nogil:
    cdef double p, v, total, pml, force, cs, sn, tmp, thacc, xacc, r
    cdef int64_t i
    if c.kind == 0:
        p = c.x
        v = c.xd
        v = v + 0.001 * (action - 1) - 0.0025 * cos(3.0 * p)
        v = 0.07 if v > 0.07 else (-0.07 if v < -0.07 else v)
        p = p + v
        p = 0.6 if p > 0.6 else (-1.2 if p < -1.2 else p)
        if p == -1.2 and v < 0.0:
            v = 0.0
        c.x = p
        c.xd = v
        obs[0] = p
        obs[1] = v
        terminal[0] = p >= 0.5
        r = 1.0 if terminal[0] else 0.0
    else:
        total = c.mc + c.mp
        pml = c.mp * c.hl
        force = (action - 1) * c.force
        for i in range(c.substeps):
            cs = cos(c.th)
            sn = sin(c.th)
            tmp = (force + pml * c.thd * c.thd * sn) / total
            thacc = (c.grav * sn - cs * tmp) / (c.hl * (4.0 / 3.0 - c.mp * cs * cs / total))
            xacc = tmp - pml * thacc * cs / total
            c.x = c.x + c.dt * c.xd
            c.xd = c.xd + c.dt * xacc
            c.th = c.th + c.dt * c.thd
            c.thd = c.thd + c.dt * thacc
            if c.x > c.rail:
                c.x = c.rail
                c.xd = 0.0
            elif c.x < -c.rail:
                c.x = -c.rail
                c.xd = 0.0
        cartpole_obs(c, obs)
        terminal[0] = False
        r = 1.0 if (cos(c.th) > 0.995 and fabs(c.x) < 0.25) else 0.0
    c.t += 1
    truncated[0] = (not terminal[0]) and c.t >= c.max_steps
    return r


cdef inline void project(Control* c, const double* obs, double lo0, double hi0,
                         double lo1, double hi1, int64_t bins, int64_t* i, int64_t* j) noexcept nogil:
    cdef double u, v
    if c.kind == 0:
        u = (obs[0] - lo0) / (hi0 - lo0)
        v = (obs[1] - lo1) / (hi1 - lo1)
    else:
        u = (obs[0] + 2.4) / 4.8
        v = (atan2(obs[2], obs[1]) + M_PI) / (2.0 * M_PI)
    i[0] = <int64_t>(u * bins)
    j[0] = <int64_t>(v * bins)
    if i[0] < 0:
        i[0] = 0
    if i[0] > bins - 1:
        i[0] = bins - 1
    if j[0] < 0:
        j[0] = 0
    if j[0] > bins - 1:
        j[0] = bins - 1


def explore_continuous(env, explorer, int64_t greedy_action, int64_t steps, int64_t bins):
    cdef Control c = control_load(env)
    cdef int64_t A = env.num_actions
    first_arr = np.full((bins, bins), -1, dtype=np.int64)
    cdef int64_t[:, ::1] first = first_arr
    cdef double lo0 = env.low[0], hi0 = env.high[0], lo1 = env.low[1], hi1 = env.high[1]
    q_arr = np.zeros(A, dtype=np.float64)
    if greedy_action >= 0:
        q_arr[greedy_action] = 1.0
    cdef double[::1] q = q_arr
    cdef double obs[5]
    cdef _ExplorerHandle h = _ExplorerHandle(explorer)
    cdef Explorer* ex = &h.ex
    cdef int64_t t = 0, a, i, j
    cdef bint term, trunc

    with nogil:
        control_reset(&c, obs)
        project(&c, obs, lo0, hi0, lo1, hi1, bins, &i, &j)
        first[i, j] = 0
        while t < steps:
            a = select(ex, &q[0], A)
            control_step(&c, a, obs, &term, &trunc)
            t += 1
            project(&c, obs, lo0, hi0, lo1, hi1, bins, &i, &j)
            if first[i, j] < 0:
                first[i, j] = t
            if term or trunc:
                ex.remaining = 0
                control_reset(&c, obs)
    h.store()
    control_store(&c, env)
    return first_arr, t


cdef extern from "_hot.h" nogil:
    double hot_dot(const double* w, const double* x, int64_t n)
    void hot_axpy2(double* e, const double* x, const double* y, double scale, int64_t n)
    double hot_update_dot(double* w, double c, const double* e, const double* x, int64_t n)
    double hot_update_dot2(double* w, double c, const double* e, const double* x,
                           const double* y, int64_t n, double* out_y)
    void hot_outer_real(double* out, const double* re, const double* im, const double* c,
                        const double* s, int64_t size, int64_t m)


cdef inline void fourier(const double* obs, const double* low, const double* high, int64_t D,
                         int64_t order, double* re, double* im, double* re2, double* im2,
                         double* cj, double* sj, double* phi) noexcept nogil:
    # features in lexicographic coefficient order (last dimension fastest),
    # built as a running product of exp(i*pi*c_d*xbar_d); the last level
    # only needs the real part
    cdef int64_t d, i, k, size = 1, O1 = order + 1
    cdef double x, a, b
    cdef double* tr
    re[0] = 1.0
    im[0] = 0.0
    for d in range(D):
        x = obs[d]
        if x < low[d]:
            x = low[d]
        if x > high[d]:
            x = high[d]
        x = (x - low[d]) / (high[d] - low[d])
        for k in range(O1):
            cj[k] = cos(M_PI * (k * x))
            sj[k] = sin(M_PI * (k * x))
        if d == D - 1:
            hot_outer_real(phi, re, im, cj, sj, size, O1)
            return
        for i in range(size):
            a = re[i]
            b = im[i]
            for k in range(O1):
                re2[i * O1 + k] = a * cj[k] - b * sj[k]
                im2[i * O1 + k] = a * sj[k] + b * cj[k]
        size *= O1
        tr = re
        re = re2
        re2 = tr
        tr = im
        im = im2
        im2 = tr
    phi[0] = re[0]


def fourier_features(basis, observation):
    """Compiled feature evaluation, exposed for tests and benchmarks."""
    cdef int64_t F = basis.num_features, D = basis.dims
    cdef double[::1] obs = np.ascontiguousarray(observation, dtype=np.float64)
    cdef double[::1] low = np.ascontiguousarray(basis.low, dtype=np.float64)
    cdef double[::1] high = np.ascontiguousarray(basis.high, dtype=np.float64)
    if obs.shape[0] != D:
        raise ValueError(f"expected observation of length {D}")
    buf = np.empty((5, F), dtype=np.float64)
    cdef double[:, ::1] b = buf
    cdj = np.empty((2, basis.order + 1), dtype=np.float64)
    cdef double[:, ::1] cs = cdj
    fourier(&obs[0], &low[0], &high[0], D, basis.order, &b[0, 0], &b[1, 0], &b[2, 0], &b[3, 0],
            &cs[0, 0], &cs[1, 0], &b[4, 0])
    return buf[4].copy()


def sarsa_lambda(env, lq, explorer, double alpha, double gamma, double lam, bint lr_scaling,
                 int64_t episodes, bint stop_on_goal=False):
    # Same update as the reference loop, scheduled differently: the dynamics
    # do not depend on the weights, so the environment is stepped one action
    # ahead and the weight update pass also evaluates the next Q values.
    # Traces are stored as (step_size * E) / scale so that the update pass
    # touches only the weights and traces, and the per-step decay is a scalar.
    basis = lq.basis
    cdef int64_t F = basis.num_features, D = basis.dims, order = basis.order
    cdef double[:, ::1] W = lq.weights
    cdef int64_t A = W.shape[0]
    step_arr = (alpha / basis.lr_scales) if lr_scaling else np.full(F, alpha)
    cdef double[::1] step = np.ascontiguousarray(step_arr, dtype=np.float64)
    cdef double[::1] low = np.ascontiguousarray(basis.low, dtype=np.float64)
    cdef double[::1] high = np.ascontiguousarray(basis.high, dtype=np.float64)
    trace_arr = np.zeros((A, F), dtype=np.float64)
    cdef double[:, ::1] E = trace_arr
    work = np.empty((7, F), dtype=np.float64)
    cdef double[:, ::1] wk = work
    cdj = np.empty((2, order + 1), dtype=np.float64)
    cdef double[:, ::1] cs = cdj
    qbuf = np.zeros((2, A), dtype=np.float64)
    cdef double[:, ::1] qb = qbuf
    out = np.full((episodes, 5), NAN, dtype=np.float64)
    cdef double[:, ::1] rows = out
    cdef Control c = control_load(env)
    if env.num_actions != A:
        raise ValueError("weights do not match the environment's action count")
    cdef _ExplorerHandle h = _ExplorerHandle(explorer)
    cdef Explorer* ex = &h.ex
    cdef double decay = gamma * lam
    cdef double* phi = &wk[0, 0]
    cdef double* phi2 = &wk[1, 0]
    cdef double* phi3 = &wk[2, 0]
    cdef double* q2 = &qb[0, 0]
    cdef double* q3 = &qb[1, 0]
    cdef double* tmp
    cdef double obs[5]
    cdef double r, r3 = 0.0, q_sa, q_sa3, delta, ret, disc, g, scale, cd
    cdef int64_t ep, a, a2, a3, b, k, steps, done_eps = 0, bad_ep = -1, bad_step = 0
    cdef bint term, trunc, term3 = False, trunc3 = False, goal, done, have3
    cdef double* e
    cdef double* w

    with nogil:
        for ep in range(episodes):
            for b in range(A):
                for k in range(F):
                    E[b, k] = 0.0
            scale = 1.0
            control_reset(&c, obs)
            fourier(obs, &low[0], &high[0], D, order, &wk[3, 0], &wk[4, 0], &wk[5, 0], &wk[6, 0],
                    &cs[0, 0], &cs[1, 0], phi)
            for b in range(A):
                q2[b] = hot_dot(&W[b, 0], phi, F)
            a = select(ex, q2, A)
            q_sa = q2[a]
            r = control_step(&c, a, obs, &term, &trunc)
            a2 = -1
            if not term:
                fourier(obs, &low[0], &high[0], D, order, &wk[3, 0], &wk[4, 0], &wk[5, 0],
                        &wk[6, 0], &cs[0, 0], &cs[1, 0], phi2)
                for b in range(A):
                    q2[b] = hot_dot(&W[b, 0], phi2, F)
                a2 = select(ex, q2, A)
            ret = 0.0
            disc = 0.0
            g = 1.0
            steps = 0
            goal = False
            while True:
                if term:
                    delta = r - q_sa
                else:
                    delta = r + gamma * q2[a2] - q_sa
                if not isfinite(delta):
                    bad_ep = ep
                    bad_step = steps
                    break
                done = term or trunc
                have3 = False
                if not done:
                    r3 = control_step(&c, a2, obs, &term3, &trunc3)
                    if not term3:
                        fourier(obs, &low[0], &high[0], D, order, &wk[3, 0], &wk[4, 0], &wk[5, 0],
                                &wk[6, 0], &cs[0, 0], &cs[1, 0], phi3)
                        have3 = True
                cd = delta * scale
                hot_axpy2(&E[a, 0], phi, &step[0], 1.0 / scale, F)
                q_sa3 = 0.0
                for b in range(A):
                    e = &E[b, 0]
                    w = &W[b, 0]
                    if cd == 0.0:
                        # no-op update; skipping it also keeps 0 * inf out of
                        # the weights when the scaled traces overflow
                        if done:
                            pass
                        elif b == a2 and have3:
                            q3[b] = hot_dot(w, phi3, F)
                            q_sa3 = hot_dot(w, phi2, F)
                        elif b == a2:
                            q_sa3 = hot_dot(w, phi2, F)
                        elif have3:
                            q3[b] = hot_dot(w, phi3, F)
                    elif done:
                        hot_update_dot(w, cd, e, NULL, F)
                    elif b == a2 and have3:
                        q3[b] = hot_update_dot2(w, cd, e, phi3, phi2, F, &q_sa3)
                    elif b == a2:
                        q_sa3 = hot_update_dot(w, cd, e, phi2, F)
                    elif have3:
                        q3[b] = hot_update_dot(w, cd, e, phi3, F)
                    else:
                        hot_update_dot(w, cd, e, NULL, F)
                scale *= decay
                if scale < 1e-100:
                    for b in range(A):
                        e = &E[b, 0]
                        for k in range(F):
                            e[k] *= scale
                    scale = 1.0
                ret += r
                disc += g * r
                g *= gamma
                steps += 1
                if r > 0:
                    goal = True
                if done:
                    break
                a3 = -1
                if have3:
                    a3 = select(ex, q3, A)
                tmp = phi
                phi = phi2
                phi2 = phi3
                phi3 = tmp
                tmp = q2
                q2 = q3
                q3 = tmp
                a = a2
                a2 = a3
                r = r3
                term = term3
                trunc = trunc3
                q_sa = q_sa3
            if bad_ep >= 0:
                break
            ex.remaining = 0
            rows[ep, 0] = ret
            rows[ep, 1] = disc
            rows[ep, 2] = steps
            rows[ep, 3] = 1.0 if goal else 0.0
            done_eps = ep + 1
            if stop_on_goal and goal:
                break
    h.store()
    control_store(&c, env)
    if bad_ep >= 0:
        from .learners import DivergenceError
        raise DivergenceError(f"non-finite TD error at episode {bad_ep}, step {bad_step}")
    return out[:done_eps]
