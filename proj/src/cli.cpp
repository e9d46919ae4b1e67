#include "qcreg/cli.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qcreg/config.hpp"
#include "qcreg/errors.hpp"
#include "qcreg/features.hpp"
#include "qcreg/intensity.hpp"
#include "qcreg/io.hpp"
#include "qcreg/lbs.hpp"
#include "qcreg/metrics.hpp"
#include "qcreg/optimizer.hpp"
#include "qcreg/parallel.hpp"
#include "qcreg/synthetic.hpp"

namespace qcreg {

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FeatureSource {
    bool builtin = true;
    Descriptor descriptor = Descriptor::GradientHistogram;
    std::string moving_file, static_file;
};

FeatureSource parse_feature_source(const std::string &spec) {
    FeatureSource s;
    if (spec == "builtin:hog") return s;
    if (spec == "builtin:raw") {
        s.descriptor = Descriptor::RawIntensity;
        return s;
    }
    if (spec.rfind("file:", 0) == 0) {
        const std::string files = spec.substr(5);
        const auto comma = files.find(',');
        s.builtin = false;
        s.moving_file = files.substr(0, comma);
        s.static_file = comma == std::string::npos ? s.moving_file : files.substr(comma + 1);
        if (s.moving_file.empty() || s.static_file.empty()) throw UsageError("--features file: needs a path");
        return s;
    }
    throw UsageError("--features must be builtin:raw, builtin:hog or file:PATH[,PATH2]");
}

void write_text(const std::string &path, const std::string &text) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    f << text;
}

struct RunResult {
    RegistrationConfig config;
    MultiresResult result;
    MetricsReport metrics;
};

RunResult run_registration(const Image &moving, const Image &fixed, const FeatureSource &features,
                           RegistrationConfig config) {
    FeatureBank fm, fs;
    if (features.builtin) {
        config.descriptor = features.descriptor;
        const PatchGrid grid = partition_patches(fixed, config.patches_per_side);
        fm = extract_features_builtin(moving, grid, config.descriptor);
        fs = extract_features_builtin(fixed, grid, config.descriptor);
    } else {
        fm = load_features(features.moving_file);
        fs = load_features(features.static_file);
        if (fm.d != fs.d || fm.m != fs.m) {
            throw ShapeError("feature dimension mismatch: moving file is " + std::to_string(fm.m) + "x" +
                             std::to_string(fm.d) + ", static file is " + std::to_string(fs.m) + "x" +
                             std::to_string(fs.d));
        }
        const auto p = static_cast<std::uint32_t>(config.patches_per_side);
        if (fm.m != p * p) {
            throw ShapeError("feature files hold " + std::to_string(fm.m) + " patches, --patches " +
                             std::to_string(p) + " needs " + std::to_string(p * p));
        }
    }
    const int k = std::min<int>(config.sparsify_k, static_cast<int>(fm.m));
    const CorrelationMatrix c = build_correlation(fm, fs, k);
    RunResult run{config, register_multires(moving, fixed, c, config), {}};
    run.metrics = evaluate(moving, fixed, run.result.state.map);
    return run;
}

} // namespace

int cli_main(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Quasiconformal image registration guided by patch-feature correlation"};
    app.require_subcommand(1);

    // register
    auto *reg = app.add_subcommand("register", "Register a moving image onto a static image");
    std::string moving_path, static_path, features_spec = "builtin:hog", config_path;
    std::optional<int> patches, levels;
    bool sweep = false, hist_match = false;
    std::string out_map, out_warped, out_grid, out_metrics, out_trace;
    int grid_spacing = 8;
    reg->add_option("--moving", moving_path, "Moving image (PNG or PGM)")->required();
    reg->add_option("--static", static_path, "Static image (PNG or PGM)")->required();
    auto *patches_opt = reg->add_option("--patches", patches, "Patches per side");
    reg->add_option("--features", features_spec, "builtin:raw | builtin:hog | file:MOVING[,STATIC]");
    reg->add_option("--levels", levels, "Extra pyramid levels");
    auto *sweep_flag = reg->add_flag("--sweep-patches", sweep, "Try 10,12,...,18 patches and keep the lowest E_total");
    sweep_flag->excludes(patches_opt);
    reg->add_flag("--histogram-match", hist_match, "Match the moving histogram to the static one first");
    reg->add_option("--config", config_path, "key = value configuration file");
    reg->add_option("--out-map", out_map, "QCM1 map output");
    reg->add_option("--out-warped", out_warped, "Warped static image output");
    reg->add_option("--out-grid", out_grid, "Deformed grid image output");
    reg->add_option("--grid-spacing", grid_spacing, "Grid spacing for --out-grid")->check(CLI::Range(2, 1 << 20));
    reg->add_option("--out-metrics", out_metrics, "Metrics JSON output");
    reg->add_option("--out-trace", out_trace, "Energy trace (JSON lines) output");

    // warp
    auto *warp = app.add_subcommand("warp", "Pull a static image back through a map");
    std::string warp_map, warp_static, warp_out;
    warp->add_option("--map", warp_map, "QCM1 map")->required();
    warp->add_option("--static", warp_static, "Static image")->required();
    warp->add_option("--out", warp_out, "Output image")->required();

    // metrics
    auto *met = app.add_subcommand("metrics", "Evaluate E_sim, E_smooth, E_total and flips of a map");
    std::string met_moving, met_static, met_map, met_out;
    met->add_option("--moving", met_moving, "Moving image")->required();
    met->add_option("--static", met_static, "Static image")->required();
    met->add_option("--map", met_map, "QCM1 map (identity when omitted)");
    met->add_option("--out", met_out, "Write JSON here instead of stdout");

    // features
    auto *feat = app.add_subcommand("features", "Export built-in patch descriptors as QCF1");
    std::string feat_image, feat_out, feat_descriptor = "hog";
    int feat_patches = 10;
    feat->add_option("--image", feat_image, "Input image")->required();
    feat->add_option("--patches", feat_patches, "Patches per side");
    feat->add_option("--descriptor", feat_descriptor, "raw | hog")->check(CLI::IsMember({"raw", "hog"}));
    feat->add_option("--out", feat_out, "QCF1 output")->required();

    // lbs
    auto *lbs = app.add_subcommand("lbs", "Reconstruct a map from a QCB1 Beltrami field");
    std::string lbs_mu, lbs_out, lbs_grid;
    lbs->add_option("--mu", lbs_mu, "QCB1 Beltrami coefficient file")->required();
    lbs->add_option("--out-map", lbs_out, "QCM1 map output")->required();
    lbs->add_option("--out-grid", lbs_grid, "Deformed grid image output");

    // synth
    auto *synth = app.add_subcommand("synth", "Write one of the synthetic example pairs");
    std::string synth_name, synth_moving, synth_static;
    int synth_size = 128;
    synth->add_option("--example", synth_name, "translated_blob | bent_bar | warped_disk")
        ->required()
        ->check(CLI::IsMember({"translated_blob", "bent_bar", "warped_disk"}));
    synth->add_option("--size", synth_size, "Side length in pixels")->check(CLI::Range(16, 4096));
    synth->add_option("--out-moving", synth_moving, "Moving image output")->required();
    synth->add_option("--out-static", synth_static, "Static image output")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        configure_threads_from_env();
        if (reg->parsed()) {
            const FeatureSource source = parse_feature_source(features_spec);
            if (sweep && !source.builtin) throw UsageError("--sweep-patches cannot be combined with file: features");
            RegistrationConfig config = config_path.empty() ? RegistrationConfig{} : load_config(config_path);
            if (patches) config.patches_per_side = *patches;
            if (levels) config.levels = *levels;
            config.validate();

            const Image fixed = read_image(static_path);
            Image moving = read_image(moving_path);
            if (moving.height != fixed.height || moving.width != fixed.width) {
                throw ShapeError("moving image is " + std::to_string(moving.height) + "x" +
                                 std::to_string(moving.width) + ", static image is " + std::to_string(fixed.height) +
                                 "x" + std::to_string(fixed.width));
            }
            if (hist_match) moving = histogram_match(moving, fixed);

            std::optional<RunResult> best;
            const std::vector<int> candidates = sweep ? std::vector<int>{10, 12, 14, 16, 18}
                                                      : std::vector<int>{config.patches_per_side};
            for (int p : candidates) {
                RegistrationConfig c = config;
                c.patches_per_side = p;
                RunResult run = run_registration(moving, fixed, source, c);
                if (sweep) out << "patches " << p << ": e_total " << run.metrics.e_total << "\n";
                if (!best || run.metrics.e_total < best->metrics.e_total) best = std::move(run);
            }
            const QCMap &map = best->result.state.map;
            if (!out_map.empty()) write_map(out_map, map);
            if (!out_warped.empty()) write_image(out_warped, warp_image(map, fixed));
            if (!out_grid.empty()) write_image(out_grid, render_grid(map, grid_spacing));
            if (!out_trace.empty()) write_text(out_trace, trace_to_jsonl(best->result.trace));
            const std::string metrics = to_json(best->metrics, config_to_json(best->config));
            if (!out_metrics.empty()) write_text(out_metrics, metrics);
            else out << metrics;
        } else if (warp->parsed()) {
            const Image fixed = read_image(warp_static);
            const QCMap map = read_map(warp_map);
            write_image(warp_out, warp_image(map, fixed));
        } else if (met->parsed()) {
            const Image moving = read_image(met_moving);
            const Image fixed = read_image(met_static);
            const QCMap map = met_map.empty() ? identity_map(build_grid_mesh(fixed.height, fixed.width))
                                              : read_map(met_map);
            const std::string json = to_json(evaluate(moving, fixed, map));
            if (!met_out.empty()) write_text(met_out, json);
            else out << json;
        } else if (feat->parsed()) {
            const Image image = read_image(feat_image);
            const PatchGrid grid = partition_patches(image, feat_patches);
            const Descriptor d = feat_descriptor == "raw" ? Descriptor::RawIntensity : Descriptor::GradientHistogram;
            write_features(feat_out, extract_features_builtin(image, grid, d));
        } else if (lbs->parsed()) {
            const MuFile file = read_mu(lbs_mu);
            const TriMesh mesh = build_grid_mesh(file.height, file.width);
            const QCMap map = solve_lbs(file.mu, mesh, BoundaryCondition::identity(mesh));
            write_map(lbs_out, map);
            if (!lbs_grid.empty()) write_image(lbs_grid, render_grid(map, 8));
        } else if (synth->parsed()) {
            ImagePair pair = synth_name == "translated_blob" ? translated_blob(synth_size)
                             : synth_name == "bent_bar"      ? bent_bar(synth_size)
                                                             : warped_disk(synth_size);
            write_image(synth_moving, pair.moving);
            write_image(synth_static, pair.fixed);
        }
    } catch (const UsageError &e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

int cli_main(int argc, char **argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return cli_main(args, std::cout, std::cerr);
}

} // namespace qcreg
