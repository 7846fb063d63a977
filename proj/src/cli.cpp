#include "mmsim/cli.h"

#include "mmsim/baseline.h"
#include "mmsim/errors.h"
#include "mmsim/json_util.h"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

namespace mmsim::cli {

namespace fs = std::filesystem;

void RunManifest::validate() const {
    if (robot.empty()) throw ConfigError("manifest: robot config path is required");
    if (!fs::exists(robot)) throw ConfigError("'" + robot.string() + "': no such file");
    if (worldgen && !fs::exists(*worldgen)) throw ConfigError("'" + worldgen->string() + "': no such file");
    if (env && !fs::exists(*env)) throw ConfigError("'" + env->string() + "': no such file");
    if (seeds.empty()) throw ConfigError("manifest: seed list is empty");
    if (policy == PolicyKind::Replay && !replay_dir)
        throw ConfigError("manifest: replay policy needs a log directory (--replay)");
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    auto number = [&](const std::string& s) {
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
            throw ConfigError("seeds: expected 'a..b' or a non-negative integer, got '" + text + "'");
        try {
            return static_cast<std::uint64_t>(std::stoull(s));
        } catch (const std::out_of_range&) {
            throw ConfigError("seeds: value out of range in '" + text + "'");
        }
    };
    const auto dots = text.find("..");
    if (dots == std::string::npos) return {number(text)};
    const std::uint64_t a = number(text.substr(0, dots));
    const std::uint64_t b = number(text.substr(dots + 2));
    if (b < a) throw ConfigError("seeds: empty range '" + text + "'");
    if (b - a >= 1000000) throw ConfigError("seeds: range '" + text + "' is too large");
    std::vector<std::uint64_t> out;
    for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
    return out;
}

std::string world_file_name(std::uint64_t seed) { return "world_" + std::to_string(seed) + ".json"; }
std::string episode_file_name(std::uint64_t seed) { return "episode_" + std::to_string(seed) + ".json"; }
std::string log_file_name(std::uint64_t seed) { return "log_" + std::to_string(seed) + ".jsonl"; }

namespace {

struct Inputs {
    RobotModel robot;
    WorldGenConfig worldgen;
    EnvConfig env;
};

// Every failure while reading configuration surfaces as ConfigError.
Inputs load_inputs(const RunManifest& m) {
    m.validate();
    auto wrap = [](const fs::path& p, auto&& fn) {
        try {
            return fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError("'" + p.string() + "': " + e.what());
        }
    };
    Inputs in;
    in.robot = wrap(m.robot, [&] { return load_robot(m.robot); });
    if (m.worldgen) in.worldgen = wrap(*m.worldgen, [&] { return load_worldgen(*m.worldgen); });
    if (m.env) in.env = wrap(*m.env, [&] { return load_env_config(*m.env); });
    in.worldgen.validate();
    in.env.validate();
    return in;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("'" + dir.string() + "': " + ec.message());
}

std::string fixed(double v, int digits) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << v;
    return ss.str();
}

}  // namespace

void cmd_gen(const RunManifest& m, std::ostream& out) {
    const Inputs in = load_inputs(m);
    ensure_dir(m.out);
    for (std::uint64_t seed : m.seeds) {
        EpisodeSpec e;
        try {
            e = generate_episode(in.worldgen, in.robot, seed);
        } catch (const std::exception& ex) {
            throw std::runtime_error("seed " + std::to_string(seed) + ": " + ex.what());
        }
        if (!episode_solvable(e, in.worldgen.rejection_inflation))
            throw std::runtime_error("seed " + std::to_string(seed) + ": episode failed the solvability re-check");
        write_text_file(m.out / world_file_name(seed), dump_pretty(world_to_json(e.world)));
        write_text_file(m.out / episode_file_name(seed), serialize_episode(e));
        const double dist = std::hypot(e.goal.position.x() - e.start.x, e.goal.position.y() - e.start.y);
        out << "seed " << seed << ": " << e.world.shapes.size() << " obstacles, goal distance " << fixed(dist, 3)
            << " m\n";
    }
    out << "wrote " << m.seeds.size() << " episodes to " << m.out.string() << "\n";
}

RunSummary summarize(const std::vector<EpisodeLog>& logs) {
    RunSummary s;
    s.episodes = static_cast<int>(logs.size());
    long total_steps = 0;
    for (const EpisodeLog& log : logs) {
        if (!log.error.empty()) {
            ++s.errors;
            continue;
        }
        s.successes += log.success() ? 1 : 0;
        total_steps += static_cast<long>(log.steps.size());
    }
    if (s.episodes > 0) s.success_rate = static_cast<double>(s.successes) / s.episodes;
    const int ran = s.episodes - s.errors;
    if (ran > 0) s.mean_length = static_cast<double>(total_steps) / ran;
    return s;
}

RunSummary cmd_run(const RunManifest& m, std::ostream& out) {
    const Inputs in = load_inputs(m);
    ensure_dir(m.out);
    const MotionKind kind = m.motion;
    std::vector<EpisodeLog> logs;
    double step_seconds = 0.0;
    long steps = 0;
    json episodes = json::array();
    out << std::left << std::setw(8) << "seed" << std::setw(18) << "termination" << std::setw(8) << "steps"
        << "return\n";
    for (std::uint64_t seed : m.seeds) {
        EpisodeLog log;
        log.robot = in.robot.name;
        log.motion = to_string(kind);
        log.config = in.env;
        try {
            log.episode = generate_episode(in.worldgen, in.robot, seed);
            Policy policy;
            if (m.policy == PolicyKind::Greedy) {
                policy = greedy_policy(GreedyConfig::for_robot(in.robot, in.env));
            } else {
                policy = replay_policy(read_log(*m.replay_dir / log_file_name(seed)), in.robot);
            }
            double secs = 0.0;
            log = run_episode(log.episode, in.robot, in.env, kind, policy, &secs);
            step_seconds += secs;
            steps += static_cast<long>(log.steps.size());
        } catch (const std::exception& e) {
            log.steps.clear();
            log.termination = Termination::None;
            log.episode_return = 0.0;
            log.error = e.what();
        }
        write_text_file(m.out / log_file_name(seed), serialize_log(log));
        out << std::setw(8) << seed << std::setw(18) << (log.error.empty() ? to_string(log.termination) : "error")
            << std::setw(8) << log.steps.size() << fixed(log.episode_return, 4) << "\n";
        if (!log.error.empty()) out << "  error: " << log.error << "\n";
        episodes.push_back({{"seed", seed},
                            {"termination", to_string(log.termination)},
                            {"steps", log.steps.size()},
                            {"return", log.episode_return},
                            {"error", log.error}});
        logs.push_back(std::move(log));
    }
    RunSummary s = summarize(logs);
    s.mean_step_seconds = steps > 0 ? step_seconds / steps : 0.0;
    const json summary{{"robot", in.robot.name},
                       {"motion", to_string(kind)},
                       {"policy", m.policy == PolicyKind::Greedy ? "greedy" : "replay"},
                       {"episodes", s.episodes},
                       {"successes", s.successes},
                       {"errors", s.errors},
                       {"success_rate", s.success_rate},
                       {"mean_length", s.mean_length},
                       {"per_episode", episodes}};
    write_text_file(m.out / "summary.json", dump_pretty(summary));
    out << "episodes " << s.episodes << ", success rate " << fixed(s.success_rate, 3) << ", mean length "
        << fixed(s.mean_length, 1) << " steps, errors " << s.errors << ", mean step time "
        << fixed(s.mean_step_seconds * 1e3, 3) << " ms\n";
    return s;
}

namespace {

class SvgCanvas {
public:
    SvgCanvas(const Bounds& b, double scale, double margin) : b_(b), scale_(scale), margin_(margin) {}

    std::string x(double wx) const { return fixed(margin_ + (wx - b_.min_x) * scale_, 2); }
    std::string y(double wy) const { return fixed(margin_ + (b_.max_y - wy) * scale_, 2); }
    std::string len(double w) const { return fixed(w * scale_, 2); }
    double width() const { return b_.size_x() * scale_ + 2 * margin_; }
    double height() const { return b_.size_y() * scale_ + 2 * margin_; }

private:
    Bounds b_;
    double scale_;
    double margin_;
};

std::string shape_svg(const Shape& s, const SvgCanvas& c, const std::string& style) {
    const double deg = -s.rotation * 180.0 / std::numbers::pi;
    const std::string transform =
        "translate(" + c.x(s.center.x()) + " " + c.y(s.center.y()) + ") rotate(" + fixed(deg, 3) + ")";
    if (s.type == ShapeType::Ellipse) {
        return "<ellipse transform=\"" + transform + "\" rx=\"" + c.len(s.size.x() / 2) + "\" ry=\"" +
               c.len(s.size.y() / 2) + "\" " + style + "/>\n";
    }
    return "<rect transform=\"" + transform + "\" x=\"" + c.len(-s.size.x() / 2) + "\" y=\"" +
           c.len(-s.size.y() / 2) + "\" width=\"" + c.len(s.size.x()) + "\" height=\"" + c.len(s.size.y()) +
           "\" " + style + "/>\n";
}

std::string polyline(const std::vector<Vec2>& pts, const SvgCanvas& c, const std::string& style) {
    std::string s = "<polyline points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) s += ' ';
        s += c.x(pts[i].x()) + "," + c.y(pts[i].y());
    }
    return s + "\" fill=\"none\" " + style + "/>\n";
}

}  // namespace

std::string render_svg(const EpisodeLog& log) {
    const WorldDescription& w = log.episode.world;
    const double scale = 400.0 / std::max(w.bounds.size_x(), w.bounds.size_y());
    const SvgCanvas c(w.bounds, scale, 20.0);
    std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(c.width(), 2) + "\" height=\"" +
         fixed(c.height(), 2) + "\" viewBox=\"0 0 " + fixed(c.width(), 2) + " " + fixed(c.height(), 2) + "\">\n";
    s += "<title>" + log.robot + " seed " + std::to_string(log.episode.seed) + " (" +
         (log.error.empty() ? to_string(log.termination) : "error") + ")</title>\n";
    s += "<rect x=\"" + c.x(w.bounds.min_x) + "\" y=\"" + c.y(w.bounds.max_y) + "\" width=\"" +
         c.len(w.bounds.size_x()) + "\" height=\"" + c.len(w.bounds.size_y()) +
         "\" fill=\"white\" stroke=\"black\" stroke-width=\"1\"/>\n";
    s += "<g id=\"obstacles\">\n";
    for (const Shape& sh : w.shapes) {
        // darker for taller obstacles
        const int shade = 200 - static_cast<int>(std::clamp(sh.height / 2.0, 0.0, 1.0) * 150.0);
        const std::string grey = std::to_string(shade);
        s += shape_svg(sh, c, "fill=\"rgb(" + grey + "," + grey + "," + grey + ")\"");
    }
    for (const DynamicObstacle& d : w.dynamics)
        s += shape_svg(d.shape, c, "fill=\"none\" stroke=\"orange\" stroke-dasharray=\"4 2\"");
    s += "</g>\n";

    std::vector<Vec2> base{Vec2(log.episode.start.x, log.episode.start.y)};
    std::vector<Vec2> ee;
    for (const StepRecord& r : log.steps) {
        base.emplace_back(r.base.x, r.base.y);
        ee.emplace_back(r.ee_achieved.position.x(), r.ee_achieved.position.y());
    }
    s += "<g id=\"paths\">\n";
    s += polyline(base, c, "stroke=\"blue\" stroke-width=\"1.5\"");
    if (!ee.empty()) s += polyline(ee, c, "stroke=\"red\" stroke-width=\"1.5\"");
    s += "</g>\n";
    s += "<g id=\"markers\">\n";
    s += "<circle cx=\"" + c.x(log.episode.start.x) + "\" cy=\"" + c.y(log.episode.start.y) +
         "\" r=\"5\" fill=\"green\"/>\n";
    const Vec3& g = log.episode.goal.position;
    s += "<path d=\"M " + c.x(g.x()) + " " + c.y(g.y()) + " m -5 -5 l 10 10 m 0 -10 l -10 10\" "
         "stroke=\"red\" stroke-width=\"2\"/>\n";
    s += "</g>\n</svg>\n";
    return s;
}

void cmd_plot(const fs::path& log_path, const fs::path& svg_path) {
    const EpisodeLog log = read_log(log_path);
    if (svg_path.has_parent_path()) ensure_dir(svg_path.parent_path());
    write_text_file(svg_path, render_svg(log));
}

namespace {

struct Setting {
    std::string name;
    std::string value;
    std::string source;
};

MotionKind parse_motion(const std::string& s) {
    try {
        return motion_kind_from_string(s);
    } catch (const std::exception&) {
        throw ConfigError("motion: expected slerp, fwd or spline, got '" + s + "'");
    }
}

PolicyKind parse_policy(const std::string& s) {
    if (s == "greedy") return PolicyKind::Greedy;
    if (s == "replay") return PolicyKind::Replay;
    throw ConfigError("policy: expected greedy or replay, got '" + s + "'");
}

struct Flags {
    std::string config;
    std::string robot, worldgen, env, motion, seeds, out, policy, replay;
};

// Flags win over the manifest file; every resolved value is reported with
// its origin so that nothing is overridden silently.
RunManifest resolve(const Flags& f, std::vector<Setting>& report) {
    json file = json::object();
    fs::path base;
    if (!f.config.empty()) {
        file = read_json_file(f.config);
        if (!file.is_object()) throw ConfigError("'" + f.config + "': manifest must be a JSON object");
        base = fs::path(f.config).parent_path();
    }
    auto pick = [&](const std::string& key, const std::string& flag, bool is_path) -> std::optional<std::string> {
        std::optional<std::string> from_file;
        if (file.contains(key)) {
            if (!file[key].is_string()) throw ConfigError("'" + f.config + "': '" + key + "' must be a string");
            std::string v = file[key].get<std::string>();
            if (is_path && fs::path(v).is_relative()) v = (base / v).string();
            from_file = v;
        }
        if (!flag.empty()) {
            std::string source = "flag";
            if (from_file && *from_file != flag) source += ", overrides file value '" + *from_file + "'";
            report.push_back({key, flag, source});
            return flag;
        }
        if (from_file) {
            report.push_back({key, *from_file, "file " + f.config});
            return from_file;
        }
        return std::nullopt;
    };
    for (const auto& [key, value] : file.items()) {
        static const std::vector<std::string> known{"robot", "worldgen", "env",    "motion",
                                                    "seeds", "out",      "policy", "replay"};
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("'" + f.config + "': unknown key '" + key + "'");
    }
    RunManifest m;
    if (auto v = pick("robot", f.robot, true)) m.robot = *v;
    if (auto v = pick("worldgen", f.worldgen, true)) m.worldgen = fs::path(*v);
    else report.push_back({"worldgen", "built-in", "default"});
    if (auto v = pick("env", f.env, true)) m.env = fs::path(*v);
    else report.push_back({"env", "built-in", "default"});
    if (auto v = pick("motion", f.motion, false)) m.motion = parse_motion(*v);
    else report.push_back({"motion", "slerp", "default"});
    if (auto v = pick("seeds", f.seeds, false)) m.seeds = parse_seeds(*v);
    if (auto v = pick("out", f.out, true)) m.out = *v;
    else report.push_back({"out", m.out.string(), "default"});
    if (auto v = pick("policy", f.policy, false)) m.policy = parse_policy(*v);
    else report.push_back({"policy", "greedy", "default"});
    if (auto v = pick("replay", f.replay, true)) m.replay_dir = fs::path(*v);
    return m;
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mobile manipulation episode generator and rollout runner", "mmsim"};
    app.require_subcommand(1);
    Flags flags;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config, "JSON run manifest; flags take precedence over its keys");
        sub->add_option("--robot", flags.robot, "robot config file");
        sub->add_option("--worldgen", flags.worldgen, "world generation config file");
        sub->add_option("--env", flags.env, "environment config file");
        sub->add_option("--motion", flags.motion, "EE motion: slerp, fwd or spline");
        sub->add_option("--seeds", flags.seeds, "seed range a..b (inclusive) or a single seed");
        sub->add_option("--out", flags.out, "output directory");
    };
    CLI::App* gen = app.add_subcommand("gen", "generate world and episode files");
    add_common(gen);
    CLI::App* run = app.add_subcommand("run", "roll out one episode per seed and summarize");
    add_common(run);
    run->add_option("--policy", flags.policy, "greedy or replay");
    run->add_option("--replay", flags.replay, "directory with logs to replay (replay policy)");
    CLI::App* plot = app.add_subcommand("plot", "render an episode log as SVG");
    std::string log_path, svg_path;
    plot->add_option("log", log_path, "episode log (JSON lines)")->required();
    plot->add_option("--out", svg_path, "output SVG file (default: log path with .svg)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    if (plot->parsed()) {
        try {
            const fs::path svg = svg_path.empty() ? fs::path(log_path).replace_extension(".svg") : fs::path(svg_path);
            cmd_plot(log_path, svg);
            out << "wrote " << svg.string() << "\n";
            return kOk;
        } catch (const std::exception& e) {
            err << "error: " << e.what() << "\n";
            return kRuntime;
        }
    }

    RunManifest m;
    try {
        std::vector<Setting> report;
        m = resolve(flags, report);
        if (m.robot.empty()) {
            err << "error: --robot is required (flag or manifest key)\n";
            return kUsage;
        }
        if (m.seeds.empty()) {
            err << "error: --seeds is required (flag or manifest key)\n";
            return kUsage;
        }
        out << "settings (flags take precedence over manifest file):\n";
        for (const Setting& s : report) out << "  " << std::left << std::setw(9) << s.name << s.value << "  [" << s.source << "]\n";
        m.validate();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfig;
    }

    try {
        if (gen->parsed()) {
            cmd_gen(m, out);
        } else {
            cmd_run(m, out);
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kOk;
}

}  // namespace mmsim::cli
