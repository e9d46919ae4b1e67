#include "qcreg/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "qcreg/errors.hpp"

namespace qcreg {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double to_double(std::string_view key, std::string_view value) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("'" + std::string(key) + "' expects a number, got '" + std::string(value) + "'");
    }
    return out;
}

int to_int(std::string_view key, std::string_view value) {
    int out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("'" + std::string(key) + "' expects an integer, got '" + std::string(value) + "'");
    }
    return out;
}

} // namespace

void apply_config_entry(RegistrationConfig &c, std::string_view key, std::string_view value) {
    const auto d = [&] { return to_double(key, value); };
    const auto i = [&] { return to_int(key, value); };
    if (key == "alpha") c.alpha = d();
    else if (key == "rho") c.rho = d();
    else if (key == "beta") c.beta = d();
    else if (key == "gamma") c.gamma = d();
    else if (key == "sigma") c.sigma = d();
    else if (key == "patches") c.patches_per_side = i();
    else if (key == "sparsify_k") c.sparsify_k = i();
    else if (key == "descriptor") {
        if (value == "raw") c.descriptor = Descriptor::RawIntensity;
        else if (value == "hog") c.descriptor = Descriptor::GradientHistogram;
        else throw ConfigError("descriptor must be 'raw' or 'hog', got '" + std::string(value) + "'");
    }
    else if (key == "base_step") c.base_step = d();
    else if (key == "t1") c.t1 = d();
    else if (key == "t2") c.t2 = d();
    else if (key == "t3") c.t3 = d();
    else if (key == "max_halvings") c.max_halvings = i();
    else if (key == "max_displacement") c.max_displacement = d();
    else if (key == "epsilon") c.epsilon = d();
    else if (key == "n_max") c.n_max = i();
    else if (key == "refine_n_max") c.refine_n_max = i();
    else if (key == "refine_step") c.refine_step = d();
    else if (key == "demon_steps") c.demon_steps = i();
    else if (key == "demon_alpha") c.demon_alpha = d();
    else if (key == "levels") c.levels = i();
    else if (key == "truncation") c.truncation = d();
    else if (key == "smoothing_side") c.smoothing_side = d();
    else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

RegistrationConfig parse_config(std::string_view text, RegistrationConfig base) {
    int line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        try {
            apply_config_entry(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError &e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return base;
}

RegistrationConfig load_config(const std::filesystem::path &path, RegistrationConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), base);
}

std::string config_to_json(const RegistrationConfig &c) {
    nlohmann::ordered_json j;
    j["alpha"] = c.alpha;
    j["rho"] = c.rho;
    j["beta"] = c.resolved_beta();
    j["gamma"] = c.resolved_gamma();
    j["sigma"] = c.sigma;
    j["patches"] = c.patches_per_side;
    j["sparsify_k"] = c.sparsify_k;
    j["descriptor"] = c.descriptor == Descriptor::RawIntensity ? "raw" : "hog";
    j["base_step"] = c.base_step;
    j["t1"] = c.resolved_t1();
    j["t2"] = c.resolved_t2();
    j["t3"] = c.resolved_t3();
    j["max_halvings"] = c.max_halvings;
    j["max_displacement"] = c.max_displacement;
    j["epsilon"] = c.epsilon;
    j["n_max"] = c.n_max;
    j["refine_n_max"] = c.refine_n_max;
    j["refine_step"] = c.refine_step;
    j["demon_steps"] = c.demon_steps;
    j["demon_alpha"] = c.demon_alpha;
    j["levels"] = c.levels;
    j["truncation"] = c.truncation;
    j["smoothing_side"] = c.smoothing_side;
    return j.dump();
}

} // namespace qcreg
