#include "eigentrack/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "eigentrack/error.hpp"

namespace eigentrack {

namespace pt = boost::property_tree;

bool Box::contains(std::span<const double> mu, double slack) const
{
    if (mu.size() != axes.size()) {
        return false;
    }
    for (std::size_t k = 0; k < axes.size(); ++k) {
        double width = axes[k].hi - axes[k].lo;
        if (mu[k] < axes[k].lo - slack * width || mu[k] > axes[k].hi + slack * width) {
            return false;
        }
    }
    return true;
}

CoeffSpec CoeffSpec::identity()
{
    return {Expression::constant(1.0), Expression::constant(0.0), Expression::constant(0.0),
            Expression::constant(1.0)};
}

void RunConfig::validate() const
{
    if (box.axes.empty()) {
        throw ValidationError("box must have at least one axis");
    }
    for (std::size_t k = 0; k < box.axes.size(); ++k) {
        if (!(box.axes[k].lo < box.axes[k].hi)) {
            throw ValidationError("box axis " + std::to_string(k + 1) + " needs a < b");
        }
    }
    if (!(window.lo < window.hi)) {
        throw ValidationError("window needs lambda_min < lambda_max");
    }
    if (mesh_n < 3) {
        throw ValidationError("mesh_n must be >= 3");
    }
    if (w1 < 0.0 || w2 < 0.0 || !(w1 + w2 > 0.0)) {
        throw ValidationError("weights need w1, w2 >= 0 and w1 + w2 > 0");
    }
    if (!(t_pi > 0.0 && t_pi < 1.0)) {
        throw ValidationError("t_pi must lie in (0, 1)");
    }
    if (!(t_lambda > 0.0)) {
        throw ValidationError("t_lambda must be positive");
    }
    if (initial_level.size() != box.axes.size()) {
        throw ValidationError("initial_level needs one entry per axis");
    }
    if (std::any_of(initial_level.begin(), initial_level.end(), [](int m) { return m < 0; })) {
        throw ValidationError("initial_level entries must be nonnegative");
    }
    if (max_level < 0) {
        throw ValidationError("max_level must be nonnegative");
    }
    if (coefficient.c12.canonical() != coefficient.c21.canonical()) {
        throw ValidationError("c12 and c21 must be identical expressions");
    }
}

namespace {

const std::map<std::string, std::set<std::string>> kSchema = {
    {"problem", {"box", "window", "c11", "c12", "c21", "c22", "mesh_n"}},
    {"tolerances", {"w1", "w2", "t_pi", "t_lambda"}},
    {"grid", {"initial_level", "max_level"}},
    {"output", {"cache_dir", "output_dir"}},
};

std::vector<double> numbers(const std::string& key, std::string text)
{
    for (char& c : text) {
        if (c == '[' || c == ']' || c == ',') {
            c = ' ';
        }
    }
    std::vector<double> out;
    std::istringstream is(text);
    std::string token;
    while (is >> token) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (ec != std::errc{} || ptr != token.data() + token.size()) {
            throw ParseError("key '" + key + "': '" + token + "' is not a number");
        }
        out.push_back(v);
    }
    return out;
}

Interval interval(const std::string& key, const std::string& text)
{
    auto v = numbers(key, text);
    if (v.size() != 2) {
        throw ParseError("key '" + key + "': expected two numbers, got '" + text + "'");
    }
    return {v[0], v[1]};
}

double scalar(const std::string& key, const std::string& text)
{
    auto v = numbers(key, text);
    if (v.size() != 1) {
        throw ParseError("key '" + key + "': expected one number, got '" + text + "'");
    }
    return v[0];
}

int integer(const std::string& key, const std::string& text)
{
    double v = scalar(key, text);
    if (v != static_cast<double>(static_cast<int>(v))) {
        throw ParseError("key '" + key + "': expected an integer, got '" + text + "'");
    }
    return static_cast<int>(v);
}

} // namespace

RunConfig parse_config(std::string_view text)
{
    pt::ptree tree;
    try {
        std::istringstream is{std::string(text)};
        pt::ini_parser::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }

    std::map<std::string, std::string> values;
    for (const auto& [section, body] : tree) {
        auto it = kSchema.find(section);
        if (it == kSchema.end()) {
            throw ParseError(!body.data().empty()
                                 ? "config: key '" + section + "' outside a section"
                                 : "config: unknown section [" + section + "]");
        }
        for (const auto& [key, value] : body) {
            if (!it->second.count(key)) {
                throw ParseError("config: unknown key '" + key + "' in [" + section + "]");
            }
            values[key] = value.get_value<std::string>();
        }
    }

    auto required = [&](const std::string& key) -> const std::string& {
        auto it = values.find(key);
        if (it == values.end()) {
            throw ParseError("config: missing required key '" + key + "'");
        }
        return it->second;
    };
    auto optional = [&](const std::string& key) -> const std::string* {
        auto it = values.find(key);
        return it == values.end() ? nullptr : &it->second;
    };

    RunConfig cfg;
    {
        std::string box_text = required("box");
        std::istringstream is(box_text);
        std::string axis;
        while (std::getline(is, axis, ';')) {
            cfg.box.axes.push_back(interval("box", axis));
        }
        if (cfg.box.axes.empty()) {
            throw ParseError("config: key 'box' is empty");
        }
    }
    const int dim = cfg.box.dim();
    cfg.window = interval("window", required("window"));

    auto expr = [&](const char* key) {
        try {
            return Expression::parse(required(key), dim);
        } catch (const ParseError& e) {
            throw ParseError(std::string("config: key '") + key + "': " + e.what());
        }
    };
    cfg.coefficient = {expr("c11"), expr("c12"), expr("c21"), expr("c22")};
    if (cfg.coefficient.c12.canonical() != cfg.coefficient.c21.canonical()) {
        throw ParseError("config: key 'c21' must be syntactically identical to 'c12'");
    }

    if (auto* v = optional("mesh_n")) {
        cfg.mesh_n = integer("mesh_n", *v);
    }
    cfg.w1 = scalar("w1", required("w1"));
    cfg.w2 = scalar("w2", required("w2"));
    cfg.t_pi = scalar("t_pi", required("t_pi"));
    cfg.t_lambda = scalar("t_lambda", required("t_lambda"));

    cfg.initial_level.assign(static_cast<std::size_t>(dim), 1);
    if (auto* v = optional("initial_level")) {
        auto levels = numbers("initial_level", *v);
        if (levels.size() == 1) {
            levels.assign(static_cast<std::size_t>(dim), levels[0]);
        }
        if (levels.size() != static_cast<std::size_t>(dim)) {
            throw ParseError("config: key 'initial_level' needs 1 or " + std::to_string(dim) +
                             " entries");
        }
        for (std::size_t k = 0; k < levels.size(); ++k) {
            cfg.initial_level[k] = integer("initial_level", std::to_string(levels[k]));
        }
    }
    if (auto* v = optional("max_level")) {
        cfg.max_level = integer("max_level", *v);
    }
    if (auto* v = optional("cache_dir")) {
        cfg.cache_dir = *v;
    }
    if (auto* v = optional("output_dir")) {
        cfg.output_dir = *v;
    }

    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open config file " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

Eigen::Matrix2d eval_coefficient(const CoeffSpec& spec, std::span<const double> mu)
{
    Eigen::Matrix2d c;
    c(0, 0) = spec.c11.evaluate(mu);
    c(0, 1) = spec.c12.evaluate(mu);
    c(1, 0) = spec.c21.evaluate(mu);
    c(1, 1) = spec.c22.evaluate(mu);
    if (c(0, 1) != c(1, 0)) {
        throw ValidationError("coefficient matrix is not symmetric");
    }
    double trace = c(0, 0) + c(1, 1);
    double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
    if (!(trace > 0.0 && det > 0.0)) {
        std::ostringstream os;
        os << "coefficient matrix is not SPD (trace " << trace << ", det " << det << ")";
        throw ValidationError(os.str());
    }
    return c;
}

} // namespace eigentrack
