#include <doctest.h>

#include "fixtures.h"
#include "mmsim/baseline.h"
#include "mmsim/env.h"
#include "mmsim/errors.h"
#include "mmsim/rng.h"
#include "oracles.h"

#include <cmath>
#include <memory>

using namespace mmsim;

namespace {

WorldGenConfig straight_cfg() {
    WorldGenConfig c;
    c.task = TaskMode::StraightLine;
    return c;
}

// Greedy actions with seeded noise; exercises collisions and deviations.
Policy fuzzed_policy(const RobotModel& robot, const EnvConfig& cfg, std::uint64_t seed, double noise) {
    auto rng = std::make_shared<Rng>(seed);
    const GreedyConfig g = GreedyConfig::for_robot(robot, cfg);
    return [rng, g, noise](const Observation& obs) {
        Action a = greedy_act(obs, g);
        a.vx += noise * rng->uniform(-1, 1);
        a.vy += noise * rng->uniform(-1, 1);
        a.omega += noise * rng->uniform(-1, 1);
        a.torso += noise * rng->uniform(-1, 1);
        a.a_ee = rng->uniform(0.0, 0.2);
        return a;
    };
}

double oracle_step_reward(const StepRecord& r, const std::vector<double>& prev, bool collision) {
    oracle::RewardCase c;
    const Vec3 d = r.ee_achieved.position - r.ee_desired.position;
    c.dpx = d.x();
    c.dpy = d.y();
    c.dpz = d.z();
    const Quat& qa = r.ee_achieved.orientation;
    const Quat& qd = r.ee_desired.orientation;
    c.qa[0] = qa.w(), c.qa[1] = qa.x(), c.qa[2] = qa.y(), c.qa[3] = qa.z();
    c.qd[0] = qd.w(), c.qd[1] = qd.x(), c.qd[2] = qd.y(), c.qd[3] = qd.z();
    c.action = r.action;
    c.prev = prev;
    c.a_ee = r.action.back();
    c.collision = collision;
    return oracle::reward(c);
}

}  // namespace

TEST_CASE("worked step examples") {
    const EnvConfig cfg;
    const Pose3 p(Vec3(1.0, 2.0, 0.8), Quat(0.5, 0.5, 0.5, 0.5));
    const std::vector<double> act{0.3, -0.2, 0.1, 0.2};

    // perfect tracking at full EE speed with an unchanged action
    CHECK(combine_reward(reward_terms({p, p, act, act, 0.2, false}, cfg), cfg) == 0.0);

    // a_ee = 0 gates the tracking and collision terms off
    const std::vector<double> prev{0.1, -0.2, 0.0, 0.0};
    const Pose3 off(Vec3(1.3, 2.0, 0.8), Quat::Identity());
    const RewardBreakdown b = reward_terms({off, p, act, prev, 0.0, true}, cfg);
    CHECK(b.n_vel == 0.0);
    const double r_acc = -(0.2 * 0.2 + 0.1 * 0.1 + 0.2 * 0.2);
    CHECK(b.r_acc == doctest::Approx(r_acc).epsilon(1e-15));
    CHECK(combine_reward(b, cfg) == doctest::Approx(-0.1 * 0.04 + 0.05 * r_acc).epsilon(1e-15));

    // 0.1 m position error, exact orientation, full speed, steady action
    const Pose3 shifted(p.position + Vec3(0.0, 0.1, 0.0), p.orientation);
    CHECK(combine_reward(reward_terms({shifted, p, act, act, 0.2, false}, cfg), cfg) ==
          doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("worked examples through env.step") {
    const RobotModel robot = load_test_robot("pr2");
    const EnvConfig cfg;
    const EpisodeSpec spec = generate_episode(straight_cfg(), robot, 7);

    // a_ee = 0 with zero base motion: the desired pose stays put
    Env env(robot, cfg);
    env.reset(spec, MotionKind::Slerp);
    Action still;
    const StepResult r0 = env.step(still);
    CHECK(r0.breakdown.n_vel == 0.0);
    CHECK(r0.breakdown.r_acc == 0.0);
    CHECK(r0.reward == -0.1 * (0.2 * 0.2));

    // full EE speed, stationary base, same action twice: every term vanishes
    Env env2(robot, cfg);
    env2.reset(spec, MotionKind::Slerp);
    Action full;
    full.a_ee = 0.2;
    env2.step(full);
    const StepResult r1 = env2.step(full);
    CHECK(r1.breakdown.r_acc == 0.0);
    CHECK(r1.breakdown.r_vel == 0.0);
    CHECK(r1.breakdown.n_vel == 1.0);
    CHECK(std::abs(r1.reward) < 1e-12);
}

TEST_CASE("recorded fuzzed episodes match the hand-coded reward") {
    const EnvConfig cfg;
    const WorldGenConfig wg;
    int collisions = 0, steps = 0;
    for (int k = 0; k < 10; ++k) {
        const RobotModel robot = load_test_robot(k % 3 == 0 ? "pr2" : k % 3 == 1 ? "hsr" : "tiago");
        const EpisodeSpec spec = generate_episode(wg, robot, 1000 + k);
        const EpisodeLog log = run_episode(spec, robot, cfg, MotionKind::Fwd, fuzzed_policy(robot, cfg, k, 0.8));
        const OccupancyGrid grid = spec.world.rasterize();
        std::vector<double> prev(log.steps.front().action.size(), 0.0);
        double ret = 0.0;
        for (const StepRecord& r : log.steps) {
            const bool coll = oracle::base_collides(grid, r.base.x, r.base.y, robot.footprint_radius);
            CHECK(r.breakdown.collisions == (coll ? 1.0 : 0.0));
            CHECK(std::abs(r.reward - oracle_step_reward(r, prev, coll)) <= 1e-12);
            CHECK(std::abs(r.reward - combine_reward(r.breakdown, cfg)) <= 1e-12);
            CHECK(r.breakdown.r_ik <= 0.0);
            CHECK(r.breakdown.r_vel <= 0.0);
            CHECK(r.breakdown.r_acc <= 0.0);
            CHECK(r.breakdown.n_vel >= 0.0);
            CHECK(r.breakdown.n_vel <= 1.0);
            collisions += coll;
            ++steps;
            ret += r.reward;
            prev = r.action;
        }
        CHECK(ret == doctest::Approx(log.episode_return).epsilon(1e-12));
    }
    CHECK(steps > 200);
    MESSAGE("fuzzed steps: " << steps << ", colliding: " << collisions);
}

TEST_CASE("n_vel endpoints") {
    const EnvConfig cfg;
    const Pose3 p;
    const std::vector<double> a{0, 0, 0, 0};
    CHECK(reward_terms({p, p, a, a, 0.2, false}, cfg).n_vel == 1.0);
    CHECK(reward_terms({p, p, a, a, 0.0, false}, cfg).n_vel == 0.0);
    CHECK(reward_terms({p, p, a, a, 0.1, false}, cfg).n_vel == doctest::Approx(0.5));
    CHECK_THROWS_AS(reward_terms({p, p, a, {0, 0}, 0.1, false}, cfg), ContractError);
}

TEST_CASE("termination counter semantics") {
    EnvConfig cfg;
    bool boot = true;

    SUBCASE("21 consecutive deviations terminate, bootstrap false") {
        ViolationState st;
        for (int i = 1; i <= 20; ++i) CHECK(classify_termination(st, {false, true, false}, i, cfg, boot) == Termination::None);
        CHECK(classify_termination(st, {false, true, false}, 21, cfg, boot) == Termination::Deviation);
        CHECK_FALSE(boot);
    }
    SUBCASE("20 violations then recovery resets the counter") {
        ViolationState st;
        for (int i = 1; i <= 20; ++i) classify_termination(st, {false, true, false}, i, cfg, boot);
        CHECK(classify_termination(st, {false, false, false}, 21, cfg, boot) == Termination::None);
        CHECK(st.counter == 0);
        for (int i = 22; i <= 41; ++i) CHECK(classify_termination(st, {false, true, false}, i, cfg, boot) == Termination::None);
    }
    SUBCASE("cumulative mode does not reset") {
        cfg.budget_mode = BudgetMode::Cumulative;
        ViolationState st;
        Termination t = Termination::None;
        for (int i = 1; i <= 60 && t == Termination::None; ++i)
            t = classify_termination(st, {false, i % 2 == 0, false}, i, cfg, boot);
        CHECK(t == Termination::Deviation);
        CHECK(st.total_violations == 21);
    }
    SUBCASE("collisions share the budget and block success") {
        ViolationState st;
        CHECK(classify_termination(st, {false, false, true}, 1, cfg, boot) == Termination::None);
        CHECK(classify_termination(st, {true, false, false}, 2, cfg, boot) == Termination::None);
        for (int i = 3; i <= 22; ++i) classify_termination(st, {false, true, false}, i, cfg, boot);
        CHECK(classify_termination(st, {false, true, true}, 23, cfg, boot) == Termination::CollisionBudget);
        CHECK_FALSE(boot);
    }
    SUBCASE("success and max steps bootstrap") {
        ViolationState st;
        CHECK(classify_termination(st, {true, false, false}, 5, cfg, boot) == Termination::Success);
        CHECK(boot);
        ViolationState st2;
        CHECK(classify_termination(st2, {false, false, false}, cfg.max_steps, cfg, boot) == Termination::MaxSteps);
        CHECK(boot);
    }
}

TEST_CASE("observation layout partitions the flat vector") {
    for (const char* name : {"pr2", "hsr", "tiago"}) {
        const RobotModel robot = load_test_robot(name);
        const ObservationLayout l = observation_layout(robot);
        std::size_t offset = 0;
        for (const LayoutSlice& s : l.slices) {
            CHECK(s.offset == offset);
            offset += s.length;
        }
        CHECK(offset == l.size);
        CHECK(l.at("coarse_map").length == 900);
        CHECK(l.at("fine_map").length == 900);
        CHECK(l.at("joints").length == std::size_t(robot.dof()));
        CHECK(l.at("prev_action").length == action_names(robot).size());
        CHECK_THROWS_AS(l.at("nope"), ContractError);

        Env env(robot, EnvConfig{});
        const Observation o = env.reset(generate_episode(WorldGenConfig{}, robot, 3), MotionKind::Fwd);
        const std::vector<double> v = o.flatten();
        REQUIRE(v.size() == l.size);
        const LayoutSlice& d = l.at("desired");
        CHECK(v[d.offset] == o.desired.position.x());
        CHECK(v[d.offset + 3] == o.desired.orientation.w());
        const LayoutSlice& j = l.at("joints");
        for (int i = 0; i < robot.dof(); ++i) CHECK(v[j.offset + i] == o.joints[i]);
        for (double x : o.prev_action) CHECK(x == 0.0);
    }
}

TEST_CASE("action flattening follows the robot's action space") {
    const RobotModel omni = load_test_robot("hsr"), diff = load_test_robot("tiago");
    CHECK(action_names(omni) == std::vector<std::string>{"vx", "vy", "omega", "a_ee"});
    CHECK(action_names(diff) == std::vector<std::string>{"vx", "omega", "torso", "a_ee"});
    Action a;
    a.vx = 0.5;
    a.vy = -0.3;
    a.omega = 0.2;
    a.torso = 0.7;
    a.a_ee = 0.1;
    const Action b = unflatten_action(flatten_action(a, diff), diff);
    CHECK(b.vx == 0.5);
    CHECK(b.vy == 0.0);
    CHECK(b.torso == 0.7);
    CHECK_THROWS_AS(unflatten_action({0.0, 0.0}, diff), ContractError);
    const Action c = clamp_action({3.0, -3.0, 2.0, -2.0, 0.5}, 0.2);
    CHECK(c.vx == 1.0);
    CHECK(c.vy == -1.0);
    CHECK(c.torso == -1.0);
    CHECK(c.a_ee == 0.2);
}

TEST_CASE("reset is deterministic and the intermediate goal is within lookahead") {
    const RobotModel robot = load_test_robot("pr2");
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const EpisodeSpec spec = generate_episode(WorldGenConfig{}, robot, seed);
        Env a(robot, EnvConfig{}), b(robot, EnvConfig{});
        const Observation oa = a.reset(spec, MotionKind::Fwd);
        CHECK(oa.flatten() == b.reset(spec, MotionKind::Fwd).flatten());
        const Pose3 goal_world = transform_from_frame(oa.goal, a.base());
        CHECK(a.plan().project(goal_world.position) <= 1.5 + 1e-9);
        CHECK(oa.v_ee.norm() == doctest::Approx(0.2));
    }
}

TEST_CASE("empty world plan is the straight corridor") {
    const RobotModel robot = load_test_robot("hsr");
    const EpisodeSpec spec = generate_episode(straight_cfg(), robot, 4);
    Env env(robot, EnvConfig{});
    env.reset(spec, MotionKind::Slerp);
    const Vec3 a = env.plan().poses.front().position, b = env.plan().poses.back().position;
    CHECK(env.plan().length() == doctest::Approx((b - a).norm()).epsilon(1e-9));
    for (const Pose3& p : env.plan().poses) {
        const Vec3 d = p.position - a;
        CHECK((d - d.dot((b - a).normalized()) * (b - a).normalized()).norm() < 1e-9);
    }
}

namespace {

EpisodeSpec translated(const EpisodeSpec& spec, const Vec2& t) {
    EpisodeSpec moved = spec;
    moved.world.bounds = {spec.world.bounds.min_x + t.x(), spec.world.bounds.min_y + t.y(),
                          spec.world.bounds.max_x + t.x(), spec.world.bounds.max_y + t.y()};
    for (Shape& s : moved.world.shapes) s.center += t;
    for (DynamicObstacle& d : moved.world.dynamics) d.shape.center += t;
    moved.start.x += t.x();
    moved.start.y += t.y();
    moved.goal.position.head<2>() += t;
    return moved;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

// Steps both episodes with the same greedy actions while the arm can reach
// the desired pose; returns the number of steps compared.
int compare_translated(const RobotModel& robot, const EpisodeSpec& spec, const Vec2& t, int max_steps) {
    Env a(robot, EnvConfig{}), b(robot, EnvConfig{});
    Observation oa = a.reset(spec, MotionKind::Fwd), ob = b.reset(translated(spec, t), MotionKind::Fwd);
    const GreedyConfig g = GreedyConfig::for_robot(robot, EnvConfig{});
    int k = 0;
    for (; k < max_steps; ++k) {
        CHECK(max_abs_diff(oa.flatten(), ob.flatten()) < 1e-9);
        const Action act = greedy_act(oa, g);
        const StepResult ra = a.step(act), rb = b.step(act);
        CHECK(std::abs(ra.reward - rb.reward) < 1e-9);
        if (ra.terminated || rb.terminated || !ra.ik_ok) break;
        oa = ra.observation;
        ob = rb.observation;
    }
    return k;
}

}  // namespace

TEST_CASE("reset observations are invariant to translating the whole episode") {
    for (const char* name : {"pr2", "hsr", "tiago"}) {
        const RobotModel robot = load_test_robot(name);
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const EpisodeSpec spec = generate_episode(WorldGenConfig{}, robot, seed);
            Env a(robot, EnvConfig{}), b(robot, EnvConfig{});
            const Vec2 t(2.0 + 0.37 * seed, -3.0 - 0.11 * seed);
            CHECK(max_abs_diff(a.reset(spec, MotionKind::Fwd).flatten(),
                               b.reset(translated(spec, t), MotionKind::Fwd).flatten()) < 1e-9);
        }
    }
}

TEST_CASE("stepped observations stay translation invariant while the arm tracks") {
    // Once a desired pose is out of reach the solver returns one of many
    // equally good configurations, so the comparison stops there.
    int compared = 0;
    for (const char* name : {"pr2", "hsr", "tiago"}) {
        const RobotModel robot = load_test_robot(name);
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            compared += compare_translated(robot, generate_episode(straight_cfg(), robot, seed), {2.0, -3.0}, 400);
            compared += compare_translated(robot, generate_episode(WorldGenConfig{}, robot, seed), {-1.5, 4.25}, 400);
        }
    }
    CHECK(compared > 500);
}

TEST_CASE("integrated base motion respects the velocity limits") {
    const EnvConfig cfg;
    for (const char* name : {"pr2", "hsr", "tiago"}) {
        const RobotModel robot = load_test_robot(name);
        const EpisodeSpec spec = generate_episode(WorldGenConfig{}, robot, 55);
        const EpisodeLog log = run_episode(spec, robot, cfg, MotionKind::Slerp, fuzzed_policy(robot, cfg, 9, 3.0));
        Pose2 prev = spec.start;
        for (const StepRecord& r : log.steps) {
            CHECK(std::hypot(r.base.x - prev.x, r.base.y - prev.y) <= robot.constraints.max_linear_velocity * cfg.dt + 1e-12);
            CHECK(std::abs(wrap_angle(r.base.theta - prev.theta)) <= robot.constraints.max_angular_velocity * cfg.dt + 1e-12);
            prev = r.base;
        }
    }
}

TEST_CASE("per-step replanning on static worlds reproduces plan-once rewards") {
    EnvConfig once, every;
    every.replan_every_step = true;
    for (int k = 0; k < 10; ++k) {
        const RobotModel robot = load_test_robot(k % 2 ? "hsr" : "pr2");
        const EpisodeSpec spec = generate_episode(WorldGenConfig{}, robot, 300 + k);
        const Policy p = greedy_policy(GreedyConfig::for_robot(robot, once));
        const EpisodeLog a = run_episode(spec, robot, once, MotionKind::Fwd, p);
        const EpisodeLog b = run_episode(spec, robot, every, MotionKind::Fwd, p);
        REQUIRE(a.steps.size() == b.steps.size());
        for (std::size_t i = 0; i < a.steps.size(); ++i) CHECK(std::abs(a.steps[i].reward - b.steps[i].reward) <= 1e-12);
        CHECK(a.termination == b.termination);
    }
}

TEST_CASE("zero base commands terminate by deviation once the motion leaves reach") {
    const RobotModel robot = load_test_robot("pr2");
    const EpisodeSpec spec = generate_episode(straight_cfg(), robot, 2);
    const EpisodeLog log = run_episode(spec, robot, EnvConfig{}, MotionKind::Slerp, [](const Observation&) {
        Action a;
        a.a_ee = 0.2;
        return a;
    });
    CHECK(log.termination == Termination::Deviation);
    CHECK_FALSE(log.bootstrap);
    CHECK(log.steps.size() < 100);
}

TEST_CASE("an all-zero action never moves the desired pose and runs to the step limit") {
    const RobotModel robot = load_test_robot("hsr");
    EnvConfig cfg;
    cfg.max_steps = 50;
    const EpisodeLog log =
        run_episode(generate_episode(straight_cfg(), robot, 2), robot, cfg, MotionKind::Slerp, [](const Observation&) {
            return Action{};
        });
    CHECK(log.termination == Termination::MaxSteps);
    CHECK(log.bootstrap);
    CHECK(log.steps.size() == 50);
}

TEST_CASE("step contract errors") {
    const RobotModel robot = load_test_robot("pr2");
    Env env(robot, EnvConfig{});
    CHECK_THROWS_AS(env.step(Action{}), ContractError);
    EnvConfig cfg;
    cfg.max_steps = 1;
    Env env2(robot, cfg);
    env2.reset(generate_episode(straight_cfg(), robot, 1), MotionKind::Slerp);
    CHECK(env2.step(Action{}).terminated);
    CHECK_THROWS_AS(env2.step(Action{}), ContractError);
    CHECK_THROWS_AS(env2.step(std::vector<double>{0.0}), ContractError);
    EpisodeSpec bad = generate_episode(straight_cfg(), robot, 1);
    bad.joints.resize(2);
    CHECK_THROWS_AS(env2.reset(bad, MotionKind::Slerp), ContractError);
}

TEST_CASE("an unreachable goal makes reset report an infeasible episode") {
    const RobotModel robot = load_test_robot("pr2");
    EpisodeSpec spec = generate_episode(straight_cfg(), robot, 1);
    const Vec2 g = spec.goal.position.head<2>();
    spec.world.shapes.push_back(Shape{ShapeType::Ellipse, g, {1.0, 1.0}, 0.0, 2.0});
    Env env(robot, EnvConfig{});
    CHECK_THROWS_AS(env.reset(spec, MotionKind::Slerp), EpisodeInfeasibleError);
}

TEST_CASE("logs round-trip and replay reproduces the rewards") {
    const RobotModel robot = load_test_robot("hsr");
    const EnvConfig cfg;
    const EpisodeSpec spec = generate_episode(WorldGenConfig{}, robot, 77);
    const EpisodeLog log = run_episode(spec, robot, cfg, MotionKind::Fwd, fuzzed_policy(robot, cfg, 1, 0.3));
    const std::string text = serialize_log(log);
    const EpisodeLog back = parse_log(text);
    CHECK(serialize_log(back) == text);
    CHECK(back.steps.size() == log.steps.size());

    const EpisodeLog replay = run_episode(back.episode, robot, back.config, motion_kind_from_string(back.motion),
                                          replay_policy(back, robot));
    REQUIRE(replay.steps.size() == log.steps.size());
    for (std::size_t i = 0; i < log.steps.size(); ++i) CHECK(replay.steps[i].reward == log.steps[i].reward);
    CHECK(serialize_log(replay) == text);
}

TEST_CASE("malformed logs report the line number") {
    const RobotModel robot = load_test_robot("hsr");
    const EpisodeLog log = run_episode(generate_episode(straight_cfg(), robot, 1), robot, EnvConfig{},
                                       MotionKind::Slerp, greedy_policy(GreedyConfig::for_robot(robot, EnvConfig{})));
    std::string text = serialize_log(log);
    const std::size_t second = text.find('\n') + 1;
    text.insert(second + 5, "#");
    try {
        parse_log(text);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_log(""), ParseError);
}

TEST_CASE("env config validation and round trip") {
    EnvConfig c;
    c.r_coll = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(env_config_from_json(json::parse(R"({"dt": -0.1})")), ConfigError);
    const EnvConfig d;
    CHECK(env_config_to_json(env_config_from_json(env_config_to_json(d))).dump() == env_config_to_json(d).dump());
}
