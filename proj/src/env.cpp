#include "mmsim/env.h"

#include "mmsim/errors.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

namespace mmsim {

void EnvConfig::validate() const {
    if (!(dt > 0.0)) throw ConfigError("env: dt must be positive");
    if (!(lambda_ik > 0.0) || !(c_rot > 0.0) || !(lambda_vel > 0.0) || !(lambda_acc > 0.0))
        throw ConfigError("env: reward coefficients must be positive");
    if (!(r_coll < 0.0)) throw ConfigError("env: r_coll must be negative");
    if (!(v_ee_max > 0.0)) throw ConfigError("env: v_ee_max must be positive");
    if (!(success_position > 0.0) || !(success_rotation > 0.0) || !(deviation_position > 0.0) ||
        !(deviation_rotation > 0.0))
        throw ConfigError("env: tolerances must be positive");
    if (violation_budget < 0) throw ConfigError("env: violation_budget must be non-negative");
    if (max_steps <= 0) throw ConfigError("env: max_steps must be positive");
    if (frame_skip < 1) throw ConfigError("env: frame_skip must be at least 1");
    motion.validate();
}

EnvConfig env_config_from_json(const json& j) {
    EnvConfig c;
    try {
        c.dt = j.value("dt", c.dt);
        c.lambda_ik = j.value("lambda_ik", c.lambda_ik);
        c.c_rot = j.value("c_rot", c.c_rot);
        c.lambda_vel = j.value("lambda_vel", c.lambda_vel);
        c.lambda_acc = j.value("lambda_acc", c.lambda_acc);
        c.r_coll = j.value("r_coll", c.r_coll);
        c.v_ee_max = j.value("v_ee_max", c.v_ee_max);
        c.success_position = j.value("success_position", c.success_position);
        c.success_rotation = j.value("success_rotation", c.success_rotation);
        c.deviation_position = j.value("deviation_position", c.deviation_position);
        c.deviation_rotation = j.value("deviation_rotation", c.deviation_rotation);
        c.violation_budget = j.value("violation_budget", c.violation_budget);
        const std::string mode = j.value("budget_mode", std::string("consecutive"));
        if (mode == "consecutive") {
            c.budget_mode = BudgetMode::Consecutive;
        } else if (mode == "cumulative") {
            c.budget_mode = BudgetMode::Cumulative;
        } else {
            throw ConfigError("env: unknown budget_mode '" + mode + "'");
        }
        c.max_steps = j.value("max_steps", c.max_steps);
        c.frame_skip = j.value("frame_skip", c.frame_skip);
        c.replan_every_step = j.value("replan_every_step", c.replan_every_step);
        c.gamma = j.value("gamma", c.gamma);
        if (j.contains("motion")) c.motion = motion_config_from_json(j.at("motion"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("env config: ") + e.what());
    }
    c.validate();
    return c;
}

json env_config_to_json(const EnvConfig& c) {
    return json{{"dt", c.dt},
                {"lambda_ik", c.lambda_ik},
                {"c_rot", c.c_rot},
                {"lambda_vel", c.lambda_vel},
                {"lambda_acc", c.lambda_acc},
                {"r_coll", c.r_coll},
                {"v_ee_max", c.v_ee_max},
                {"success_position", c.success_position},
                {"success_rotation", c.success_rotation},
                {"deviation_position", c.deviation_position},
                {"deviation_rotation", c.deviation_rotation},
                {"violation_budget", c.violation_budget},
                {"budget_mode", c.budget_mode == BudgetMode::Consecutive ? "consecutive" : "cumulative"},
                {"max_steps", c.max_steps},
                {"frame_skip", c.frame_skip},
                {"replan_every_step", c.replan_every_step},
                {"gamma", c.gamma},
                {"motion", motion_config_to_json(c.motion)}};
}

EnvConfig load_env_config(const std::filesystem::path& path) {
    try {
        return env_config_from_json(read_json_file(path));
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        if (msg.find(path.string()) != std::string::npos) throw;
        throw ConfigError("'" + path.string() + "': " + msg);
    }
}

std::vector<std::string> action_names(const RobotModel& robot) {
    std::vector<std::string> n{"vx"};
    if (robot.drive == DriveType::Omnidirectional) n.push_back("vy");
    n.push_back("omega");
    if (robot.has_learned_torso()) n.push_back("torso");
    n.push_back("a_ee");
    return n;
}

std::vector<double> flatten_action(const Action& a, const RobotModel& robot) {
    std::vector<double> v{a.vx};
    if (robot.drive == DriveType::Omnidirectional) v.push_back(a.vy);
    v.push_back(a.omega);
    if (robot.has_learned_torso()) v.push_back(a.torso);
    v.push_back(a.a_ee);
    return v;
}

Action unflatten_action(const std::vector<double>& v, const RobotModel& robot) {
    const std::size_t n = action_names(robot).size();
    if (v.size() != n) {
        throw ContractError("action has " + std::to_string(v.size()) + " components, robot '" + robot.name +
                            "' expects " + std::to_string(n));
    }
    Action a;
    std::size_t k = 0;
    a.vx = v[k++];
    if (robot.drive == DriveType::Omnidirectional) a.vy = v[k++];
    a.omega = v[k++];
    if (robot.has_learned_torso()) a.torso = v[k++];
    a.a_ee = v[k++];
    return a;
}

Action clamp_action(const Action& a, double v_ee_max) {
    Action c;
    c.vx = std::clamp(a.vx, -1.0, 1.0);
    c.vy = std::clamp(a.vy, -1.0, 1.0);
    c.omega = std::clamp(a.omega, -1.0, 1.0);
    c.torso = std::clamp(a.torso, -1.0, 1.0);
    c.a_ee = std::clamp(a.a_ee, 0.0, v_ee_max);
    return c;
}

namespace {

void append_pose(std::vector<double>& out, const Pose3& p) {
    out.insert(out.end(), {p.position.x(), p.position.y(), p.position.z()});
    const auto q = to_wxyz(p.orientation);
    out.insert(out.end(), q.begin(), q.end());
}

}  // namespace

std::vector<double> Observation::flatten() const {
    std::vector<double> out;
    out.reserve(coarse.cells.size() + fine.cells.size() + joints.size() + 17 + prev_action.size());
    for (auto c : coarse.cells) out.push_back(c);
    for (auto c : fine.cells) out.push_back(c);
    out.insert(out.end(), joints.begin(), joints.end());
    out.insert(out.end(), {v_ee.x(), v_ee.y(), v_ee.z()});
    append_pose(out, desired);
    append_pose(out, goal);
    out.insert(out.end(), prev_action.begin(), prev_action.end());
    return out;
}

const LayoutSlice& ObservationLayout::at(const std::string& name) const {
    for (const auto& s : slices)
        if (s.name == name) return s;
    throw ContractError("no observation slice '" + name + "'");
}

ObservationLayout observation_layout(const RobotModel& robot) {
    ObservationLayout l;
    auto add = [&](const char* name, std::size_t len) {
        l.slices.push_back({name, l.size, len});
        l.size += len;
    };
    add("coarse_map", std::size_t(kCoarseLocalMap.cells) * kCoarseLocalMap.cells);
    add("fine_map", std::size_t(kFineLocalMap.cells) * kFineLocalMap.cells);
    add("joints", robot.joints.size());
    add("v_ee", 3);
    add("desired", 7);
    add("goal", 7);
    add("prev_action", action_names(robot).size());
    return l;
}

double combine_reward(const RewardBreakdown& b, const EnvConfig& cfg) {
    return b.n_vel * (cfg.lambda_ik * b.r_ik + b.r_coll) + cfg.lambda_vel * b.r_vel + cfg.lambda_acc * b.r_acc;
}

RewardBreakdown reward_terms(const RewardInputs& in, const EnvConfig& cfg) {
    if (in.action.size() != in.prev_action.size()) throw ContractError("reward_terms: action size mismatch");
    RewardBreakdown b;
    b.r_ik = -(in.achieved.position - in.desired.position).squaredNorm() -
             cfg.c_rot * d_rot(in.achieved.orientation, in.desired.orientation);
    b.r_vel = -(cfg.v_ee_max - in.a_ee) * (cfg.v_ee_max - in.a_ee);
    double acc = 0.0;
    for (std::size_t i = 0; i < in.action.size(); ++i) {
        const double d = in.action[i] - in.prev_action[i];
        acc += d * d;
    }
    b.r_acc = -acc;
    b.n_vel = in.a_ee / cfg.v_ee_max;
    b.collisions = in.collision ? 1.0 : 0.0;
    b.r_coll = in.collision ? cfg.r_coll : 0.0;
    return b;
}

std::string to_string(Termination t) {
    switch (t) {
        case Termination::None: return "none";
        case Termination::Success: return "success";
        case Termination::Deviation: return "deviation";
        case Termination::CollisionBudget: return "collision_budget";
        case Termination::MaxSteps: return "max_steps";
    }
    return "none";
}

Termination termination_from_string(const std::string& s) {
    if (s == "none") return Termination::None;
    if (s == "success") return Termination::Success;
    if (s == "deviation") return Termination::Deviation;
    if (s == "collision_budget") return Termination::CollisionBudget;
    if (s == "max_steps") return Termination::MaxSteps;
    throw ParseError("unknown termination '" + s + "'");
}

Termination classify_termination(ViolationState& st, const StepCheck& check, int step_index, const EnvConfig& cfg,
                                 bool& bootstrap) {
    bootstrap = false;
    if (check.collided) ++st.total_collisions;
    if (check.deviated || check.collided) {
        ++st.counter;
        ++st.total_violations;
    } else if (cfg.budget_mode == BudgetMode::Consecutive) {
        st.counter = 0;
    }
    if (check.at_goal && st.total_collisions == 0) {
        bootstrap = true;
        return Termination::Success;
    }
    if (st.counter > cfg.violation_budget) return check.collided ? Termination::CollisionBudget : Termination::Deviation;
    if (step_index >= cfg.max_steps) {
        bootstrap = true;
        return Termination::MaxSteps;
    }
    return Termination::None;
}

Env::Env(RobotModel robot, EnvConfig cfg) : robot_(std::move(robot)), cfg_(std::move(cfg)) { cfg_.validate(); }

const EEMotionPlan& Env::plan() const {
    if (!motion_) throw ContractError("env: reset has not been called");
    return motion_->plan();
}

Observation Env::reset(const EpisodeSpec& spec, MotionKind kind) {
    if (spec.joints.size() != robot_.dof()) {
        throw ContractError("episode has " + std::to_string(spec.joints.size()) + " joints, robot '" + robot_.name +
                            "' has " + std::to_string(robot_.dof()));
    }
    world_ = spec.world.rasterize();
    bounds_ = spec.world.bounds;
    dynamics_ = spec.world.dynamics;
    base_ = spec.start;
    joints_ = robot_.clamp(spec.joints);
    achieved_ = forward_kinematics(robot_, base_, joints_);
    desired_ = achieved_;
    arc_ = 0.0;
    motion_.emplace(robot_, cfg_.motion, kind);
    const OccupancyGrid now = dynamics_.empty() ? world_ : stamp_dynamics(world_, dynamics_);
    try {
        motion_->start(now, base_, achieved_, spec.goal, spec.seed, robot_.constraints.goal_height);
    } catch (const NoPathError& e) {
        active_ = false;
        throw EpisodeInfeasibleError(std::string("reset: no end-effector motion: ") + e.what());
    }
    goal_ = motion_->plan().goal;
    prev_action_.assign(action_names(robot_).size(), 0.0);
    violations_ = {};
    steps_ = 0;
    active_ = true;
    terminated_ = false;
    return observe();
}

Observation Env::observe() const {
    if (!motion_) throw ContractError("env: reset has not been called");
    Observation o;
    const LocalMapPair maps = extract_local(world_, dynamics_, base_);
    o.coarse = maps.coarse;
    o.fine = maps.fine;
    o.joints.assign(joints_.data(), joints_.data() + joints_.size());
    MotionStep ms;
    try {
        ms = next_velocity(motion_->plan(), {desired_, Vec3::Zero(), cfg_.v_ee_max * cfg_.dt}, cfg_.dt,
                           cfg_.motion.lookahead, cfg_.motion.tracking_threshold, arc_);
    } catch (const OffPlanError&) {
        ms.desired = desired_;
        ms.intermediate_goal = desired_;
    }
    o.v_ee = rotate_to_frame(ms.velocity, base_);
    o.desired = transform_to_frame(ms.desired, base_);
    o.goal = transform_to_frame(ms.intermediate_goal, base_);
    o.prev_action = prev_action_;
    return o;
}

void Env::substep(const Action& a, const std::vector<double>& flat, StepResult& out, bool first) {
    if (!dynamics_.empty() || cfg_.replan_every_step) {
        const OccupancyGrid now = dynamics_.empty() ? world_ : stamp_dynamics(world_, dynamics_);
        if (motion_->replan(now, base_, desired_)) {
            arc_ = 0.0;
            out.replanned = true;
        }
        out.plan_blocked = motion_->blocked();
    }

    bool off_plan = false;
    MotionStep ms;
    try {
        ms = next_velocity(motion_->plan(), {desired_, Vec3::Zero(), a.a_ee * cfg_.dt}, cfg_.dt, cfg_.motion.lookahead,
                           cfg_.motion.tracking_threshold, arc_);
    } catch (const OffPlanError&) {
        off_plan = true;
        ms.desired = desired_;
        ms.arc = arc_;
    }

    const double vmax = robot_.constraints.max_linear_velocity;
    VelocityCommand cmd{a.vx * vmax, a.vy * vmax, a.omega * robot_.constraints.max_angular_velocity, std::nullopt};
    std::optional<double> torso_cmd;
    if (robot_.has_learned_torso()) {
        torso_cmd = a.torso * robot_.joints[*robot_.torso_index].max_velocity;
        cmd.torso = torso_cmd;
    }
    const Pose2 base_next = integrate_base(robot_, base_, cmd, cfg_.dt);
    const IkResult ik = solve_ik(robot_, base_next, joints_, torso_cmd, ms.desired, cfg_.dt);
    const bool collided = check_base_collision(robot_, base_next, world_, dynamics_);

    const RewardBreakdown b =
        reward_terms({ik.achieved, ms.desired, flat, first ? prev_action_ : flat, a.a_ee, collided}, cfg_);
    out.breakdown.r_ik += b.r_ik;
    out.breakdown.r_vel += b.r_vel;
    out.breakdown.r_acc += b.r_acc;
    out.breakdown.n_vel = b.n_vel;
    out.breakdown.collisions += b.collisions;
    out.breakdown.r_coll += b.r_coll;

    base_ = base_next;
    joints_ = ik.joints;
    achieved_ = ik.achieved;
    desired_ = ms.desired;
    arc_ = ms.arc;
    ++steps_;

    StepCheck check;
    check.at_goal = (achieved_.position - goal_.position).norm() <= cfg_.success_position &&
                    d_rot(achieved_.orientation, goal_.orientation) <= cfg_.success_rotation;
    check.deviated = off_plan || (achieved_.position - desired_.position).norm() > cfg_.deviation_position ||
                     d_rot(achieved_.orientation, desired_.orientation) > cfg_.deviation_rotation;
    check.collided = collided;
    out.cause = classify_termination(violations_, check, steps_, cfg_, out.bootstrap);
    out.terminated = out.cause != Termination::None;
    out.ik_ok = ik.ok;

    if (!dynamics_.empty()) dynamics_ = advance_dynamics(dynamics_, cfg_.dt, bounds_);
}

StepResult Env::step(const Action& action) {
    if (!active_) throw ContractError("env: step before reset");
    if (terminated_) throw ContractError("env: step after termination");
    const Action a = clamp_action(action, cfg_.v_ee_max);
    const std::vector<double> flat = flatten_action(a, robot_);
    StepResult out;
    for (int k = 0; k < cfg_.frame_skip && !out.terminated; ++k) substep(a, flat, out, k == 0);
    out.reward = combine_reward(out.breakdown, cfg_);
    terminated_ = out.terminated;
    prev_action_ = flat;
    out.base = base_;
    out.ee_desired = desired_;
    out.ee_achieved = achieved_;
    out.observation = observe();
    return out;
}

StepResult Env::step(const std::vector<double>& flat_action) { return step(unflatten_action(flat_action, robot_)); }

EpisodeLog run_episode(const EpisodeSpec& spec, const RobotModel& robot, const EnvConfig& cfg, MotionKind kind,
                       const Policy& policy, double* step_seconds) {
    Env env(robot, cfg);
    EpisodeLog log;
    log.robot = robot.name;
    log.motion = to_string(kind);
    log.config = cfg;
    log.episode = spec;
    Observation obs = env.reset(spec, kind);
    while (!env.terminated()) {
        const Action a = clamp_action(policy(obs), cfg.v_ee_max);
        const auto t0 = std::chrono::steady_clock::now();
        StepResult r = env.step(a);
        if (step_seconds)
            *step_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        StepRecord rec;
        rec.step = env.steps();
        rec.action = flatten_action(a, robot);
        rec.reward = r.reward;
        rec.breakdown = r.breakdown;
        rec.ee_desired = r.ee_desired;
        rec.ee_achieved = r.ee_achieved;
        rec.base = r.base;
        rec.termination = r.cause;
        rec.bootstrap = r.bootstrap;
        log.episode_return += r.reward;
        log.steps.push_back(std::move(rec));
        log.termination = r.cause;
        log.bootstrap = r.bootstrap;
        obs = std::move(r.observation);
    }
    return log;
}

namespace {

json breakdown_json(const RewardBreakdown& b) {
    return json{{"r_ik", b.r_ik},   {"r_vel", b.r_vel},           {"r_acc", b.r_acc},
                {"n_vel", b.n_vel}, {"collisions", b.collisions}, {"r_coll", b.r_coll}};
}

RewardBreakdown breakdown_from_json(const json& j) {
    RewardBreakdown b;
    b.r_ik = j.at("r_ik").get<double>();
    b.r_vel = j.at("r_vel").get<double>();
    b.r_acc = j.at("r_acc").get<double>();
    b.n_vel = j.at("n_vel").get<double>();
    b.collisions = j.at("collisions").get<double>();
    b.r_coll = j.at("r_coll").get<double>();
    return b;
}

}  // namespace

std::string serialize_log(const EpisodeLog& log) {
    std::ostringstream os;
    const json header{{"type", "header"},
                      {"robot", log.robot},
                      {"motion", log.motion},
                      {"seed", log.episode.seed},
                      {"config", env_config_to_json(log.config)},
                      {"episode", episode_to_json(log.episode)}};
    os << header.dump() << '\n';
    for (const StepRecord& r : log.steps) {
        const json rec{{"type", "step"},
                       {"step", r.step},
                       {"action", r.action},
                       {"reward", r.reward},
                       {"breakdown", breakdown_json(r.breakdown)},
                       {"ee_desired", to_json(r.ee_desired)},
                       {"ee_achieved", to_json(r.ee_achieved)},
                       {"base_pose", to_json(r.base)},
                       {"termination", to_string(r.termination)},
                       {"bootstrap", r.bootstrap}};
        os << rec.dump() << '\n';
    }
    const json end{{"type", "end"},
                   {"steps", log.steps.size()},
                   {"return", log.episode_return},
                   {"termination", to_string(log.termination)},
                   {"bootstrap", log.bootstrap},
                   {"success", log.success()},
                   {"error", log.error}};
    os << end.dump() << '\n';
    return os.str();
}

EpisodeLog parse_log(const std::string& text) {
    EpisodeLog log;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    bool have_header = false, have_end = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            const std::string type = j.at("type").get<std::string>();
            if (type == "header") {
                log.robot = j.at("robot").get<std::string>();
                log.motion = j.at("motion").get<std::string>();
                log.config = env_config_from_json(j.at("config"));
                log.episode = episode_from_json(j.at("episode"));
                have_header = true;
            } else if (type == "step") {
                if (!have_header) throw ParseError("step record before header");
                StepRecord r;
                r.step = j.at("step").get<int>();
                r.action = j.at("action").get<std::vector<double>>();
                r.reward = j.at("reward").get<double>();
                r.breakdown = breakdown_from_json(j.at("breakdown"));
                r.ee_desired = pose3_from_json(j.at("ee_desired"));
                r.ee_achieved = pose3_from_json(j.at("ee_achieved"));
                r.base = pose2_from_json(j.at("base_pose"));
                r.termination = termination_from_string(j.at("termination").get<std::string>());
                r.bootstrap = j.at("bootstrap").get<bool>();
                log.steps.push_back(std::move(r));
            } else if (type == "end") {
                log.episode_return = j.at("return").get<double>();
                log.termination = termination_from_string(j.at("termination").get<std::string>());
                log.bootstrap = j.at("bootstrap").get<bool>();
                log.error = j.value("error", std::string());
                have_end = true;
            } else {
                throw ParseError("unknown record type '" + type + "'");
            }
        } catch (const std::exception& e) {
            throw ParseError("log line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!have_header) throw ParseError("log line " + std::to_string(lineno) + ": missing header record");
    if (!have_end) throw ParseError("log line " + std::to_string(lineno) + ": missing end record");
    return log;
}

EpisodeLog read_log(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open log '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_log(ss.str());
    } catch (const ParseError& e) {
        throw ParseError("'" + path.string() + "': " + e.what());
    }
}

Policy replay_policy(const EpisodeLog& log, const RobotModel& robot) {
    std::vector<Action> actions;
    for (const StepRecord& r : log.steps) actions.push_back(unflatten_action(r.action, robot));
    auto index = std::make_shared<std::size_t>(0);
    return [actions = std::move(actions), index](const Observation&) {
        return *index < actions.size() ? actions[(*index)++] : Action{};
    };
}

}  // namespace mmsim
