#include "run_config.hpp"

#include "table_io.hpp"

#include "kpgp/error.hpp"

#include <charconv>
#include <cmath>

namespace kpgp::cli {

namespace {

[[noreturn]] void config_error(const std::string& what) { fail(ErrorKind::Parameter, what); }

double to_double(std::string_view s, const std::string& what) {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v))
        config_error(what + ": '" + std::string(s) + "' is not a number");
    return v;
}

long long to_int(std::string_view s, const std::string& what) {
    long long v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || end != s.data() + s.size())
        config_error(what + ": '" + std::string(s) + "' is not an integer");
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto at = s.find(sep, start);
        out.push_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
        if (at == std::string_view::npos) break;
        start = at + 1;
    }
    return out;
}

} // namespace

KernelSpec parse_kernel_spec(std::string_view text) {
    KernelSpec out;
    bool have_p = false, have_omega = false;
    for (auto part : split(text, ',')) {
        const auto eq = part.find('=');
        if (eq == std::string_view::npos) config_error("--kernel: expected key=value, got '" + std::string(part) + "'");
        const auto key = part.substr(0, eq);
        const auto value = part.substr(eq + 1);
        if (key == "p") {
            const long long p = to_int(value, "--kernel p");
            if (p < 0 || p > 10) config_error("--kernel: p must be in [0, 10]");
            out.p = static_cast<int>(p);
            have_p = true;
        } else if (key == "omega") {
            if (value == "mle") {
                out.omega.reset();
            } else {
                out.omega = to_double(value, "--kernel omega");
                if (!(*out.omega > 0.0)) config_error("--kernel: omega must be positive");
            }
            have_omega = true;
        } else {
            config_error("--kernel: unknown key '" + std::string(key) + "'");
        }
    }
    if (!have_p || !have_omega) config_error("--kernel needs both p=<int> and omega=<real|mle>");
    return out;
}

NuggetSpec parse_nugget_spec(std::string_view text) {
    if (text == "mle") return {true, 0.0};
    const double v = to_double(text, "--nugget");
    if (v < 0.0) config_error("--nugget must be nonnegative");
    return {false, v};
}

MeanSpec parse_mean_spec(std::string_view text) {
    if (text == "profile") return {MeanSpec::Kind::Profile, 0.0};
    if (text == "none") return {MeanSpec::Kind::None, 0.0};
    return {MeanSpec::Kind::Value, to_double(text, "--mean")};
}

DesignSpec parse_design_spec(std::string_view text) {
    if (text == "raw") return {DesignSpec::Kind::Raw, "", 0};
    if (text == "grid") return {DesignSpec::Kind::Grid, "", 0};
    if (text.starts_with("sparse:")) {
        const auto parts = split(text.substr(7), ',');
        if (parts.size() != 2 || parts[0].empty()) config_error("--design: expected sparse:<family>,<level>");
        const long long level = to_int(parts[1], "--design level");
        if (level < 1 || level > 20) config_error("--design: sparse level must be in [1, 20]");
        return {DesignSpec::Kind::Sparse, std::string(parts[0]), static_cast<int>(level)};
    }
    if (text == "sparse") return {DesignSpec::Kind::Sparse, "", 0};
    config_error("--design: expected raw, grid or sparse:<family>,<level>, got '" + std::string(text) + "'");
}

OutputFormat parse_format(std::string_view text) {
    if (text == "table") return OutputFormat::Table;
    if (text == "records") return OutputFormat::Records;
    config_error("--format: expected table or records, got '" + std::string(text) + "'");
}

std::vector<std::size_t> parse_sizes(std::string_view text) {
    std::vector<std::size_t> out;
    for (auto part : split(text, ',')) {
        const auto colon = part.find(':');
        if (colon != std::string_view::npos) {
            const long long a = to_int(part.substr(0, colon), "--sizes");
            const long long b = to_int(part.substr(colon + 1), "--sizes");
            if (a < 1 || b < a || b > 24) config_error("--sizes: exponent range must satisfy 1 <= a <= b <= 24");
            for (long long e = a; e <= b; ++e) out.push_back(std::size_t{1} << e);
        } else {
            const long long n = to_int(part, "--sizes");
            if (n < 2 || n > 100000000) config_error("--sizes: sizes must be in [2, 1e8]");
            out.push_back(static_cast<std::size_t>(n));
        }
    }
    return out;
}

std::string to_string(const KernelSpec& k) {
    return "p=" + std::to_string(k.p) + ",omega=" + (k.omega ? format_number(*k.omega) : std::string("mle"));
}

std::string to_string(const NuggetSpec& n) { return n.estimate ? "mle" : format_number(n.ratio); }

std::string to_string(const MeanSpec& m) {
    switch (m.kind) {
    case MeanSpec::Kind::Profile: return "profile";
    case MeanSpec::Kind::None: return "none";
    case MeanSpec::Kind::Value: return format_number(m.value);
    }
    return "";
}

std::string to_string(const DesignSpec& d) {
    switch (d.kind) {
    case DesignSpec::Kind::Raw: return "raw";
    case DesignSpec::Kind::Grid: return "grid";
    case DesignSpec::Kind::Sparse: return d.family.empty() ? "sparse" : "sparse:" + d.family + "," + std::to_string(d.level);
    }
    return "";
}

std::string to_string(OutputFormat f) { return f == OutputFormat::Table ? "table" : "records"; }

void validate(const RunConfig& c) {
    const bool needs_train = c.command != "bench";
    if (needs_train && c.train.empty()) config_error(c.command + " needs --train");
    if (c.command == "fit-predict" && c.test.empty()) config_error("fit-predict needs --test");
    if (c.command == "loglik" && !c.kernel.omega) config_error("loglik needs a numeric omega");
    if (c.command == "loglik" && c.nugget.estimate) config_error("loglik needs a numeric nugget");
    if (c.command == "mle" && c.kernel.omega) config_error("mle needs --kernel ...,omega=mle");
    if (c.command == "kp-dump" || c.command == "bench") {
        if (!c.kernel.omega) config_error(c.command + " needs a numeric omega");
        if (c.design.kind != DesignSpec::Kind::Raw) config_error(c.command + " works on one-dimensional raw designs");
    }
    if (c.nugget.estimate && c.kernel.omega)
        config_error("--nugget mle needs omega=mle; the nugget is estimated jointly with omega");
    if (c.design.kind != DesignSpec::Kind::Raw && (c.nugget.estimate || c.nugget.ratio != 0.0))
        config_error("grid designs are noiseless; use --nugget 0");
    if (c.design.kind == DesignSpec::Kind::Sparse && c.design.family.empty() && c.manifest_in.empty())
        config_error("--design sparse needs a family and level, or --manifest");
    if (!c.manifest_in.empty() && c.design.kind != DesignSpec::Kind::Sparse)
        config_error("--manifest needs --design sparse");
    if (!c.manifest_out.empty() && c.design.kind != DesignSpec::Kind::Sparse)
        config_error("--manifest-out needs --design sparse");
    if (c.oracle && c.command != "fit-predict") config_error("--oracle applies to fit-predict");
    if (c.mesh_size < 2) config_error("--mesh must be at least 2");
    if (c.test_points < 1) config_error("--test-points must be positive");
}

std::vector<std::pair<std::string, std::string>> config_echo(const RunConfig& c) {
    std::vector<std::pair<std::string, std::string>> out = {
        {"command", c.command},
        {"kernel", to_string(c.kernel)},
        {"nugget", to_string(c.nugget)},
        {"mean", to_string(c.mean)},
        {"design", to_string(c.design)},
        {"precision", kpgp::to_string(c.precision)},
        {"seed", std::to_string(c.seed)},
        {"format", to_string(c.format)},
    };
    if (!c.train.empty()) out.emplace_back("train", c.train);
    if (!c.test.empty()) out.emplace_back("test", c.test);
    if (!c.manifest_in.empty()) out.emplace_back("manifest", c.manifest_in);
    if (!c.manifest_out.empty()) out.emplace_back("manifest_out", c.manifest_out);
    if (c.oracle) out.emplace_back("oracle", "yes");
    if (c.command == "kp-dump" && c.test.empty()) out.emplace_back("mesh", std::to_string(c.mesh_size));
    if (c.command == "bench") {
        std::string sizes;
        for (std::size_t n : c.sizes) sizes += (sizes.empty() ? "" : ",") + std::to_string(n);
        out.emplace_back("sizes", sizes);
        out.emplace_back("test_points", std::to_string(c.test_points));
        out.emplace_back("oracle_max", std::to_string(c.oracle_max));
    }
    return out;
}

} // namespace kpgp::cli
