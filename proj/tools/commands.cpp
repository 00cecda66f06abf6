#include "cli.hpp"
#include "run_config.hpp"
#include "table_io.hpp"

#include "kpgp/dense_oracle.hpp"
#include "kpgp/error.hpp"
#include "kpgp/gp1d.hpp"
#include "kpgp/grid_gp.hpp"
#include "kpgp/kp_basis.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace kpgp::cli {

namespace {

using json = nlohmann::ordered_json;

struct Section {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;
};

struct Output {
    json results = json::object();
    std::vector<Section> sections;
};

std::string cell_text(const json& v) {
    if (v.is_null()) return "na";
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    if (v.is_number()) return format_number(v.get<double>());
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_string()) return v.get<std::string>();
    std::string out;
    for (const auto& e : v) out += (out.empty() ? "" : ",") + cell_text(e);
    return out;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json numbers(std::span<const double> v) {
    json out = json::array();
    for (double x : v) out.push_back(number(x));
    return out;
}

std::string render(const RunConfig& config, const Output& output) {
    const auto echo = config_echo(config);
    if (config.format == OutputFormat::Records) {
        json doc;
        doc["config"] = json::object();
        for (const auto& [k, v] : echo) doc["config"][k] = v;
        doc["results"] = output.results;
        for (const auto& s : output.sections) {
            json rows = json::array();
            for (const auto& r : s.rows) {
                json obj = json::object();
                for (std::size_t c = 0; c < s.columns.size(); ++c) obj[s.columns[c]] = r[c];
                rows.push_back(std::move(obj));
            }
            doc[s.name] = std::move(rows);
        }
        return doc.dump(2) + "\n";
    }
    std::string out = "# kpgp " + config.command + "\n";
    for (const auto& [k, v] : echo) out += "# config " + k + " = " + v + "\n";
    for (const auto& [k, v] : output.results.items()) out += "# result " + k + " = " + cell_text(v) + "\n";
    for (const auto& s : output.sections) {
        if (output.sections.size() > 1) out += "# section " + s.name + "\n";
        std::string head;
        for (const auto& c : s.columns) head += (head.empty() ? "" : ",") + c;
        out += head + "\n";
        for (const auto& r : s.rows) {
            std::string line;
            for (const auto& v : r) line += (line.empty() ? "" : ",") + cell_text(v);
            out += line + "\n";
        }
    }
    return out;
}

// ---- data -------------------------------------------------------------

struct Dataset {
    std::size_t dim = 0;
    std::vector<double> x; // back to back
    std::vector<double> y;
    std::vector<std::size_t> lines;
    std::size_t size() const { return y.size(); }
};

Dataset load_training(const std::string& path) {
    const Table t = read_table(path);
    if (t.columns() < 2) fail(ErrorKind::Data, path + ": training data needs input columns and a response column");
    if (t.rows.empty()) fail(ErrorKind::Data, path + ": no data rows");
    Dataset d;
    d.dim = t.columns() - 1;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        d.x.insert(d.x.end(), t.rows[i].begin(), t.rows[i].end() - 1);
        d.y.push_back(t.rows[i].back());
        d.lines.push_back(t.line_numbers[i]);
    }
    return d;
}

std::vector<double> load_inputs(const std::string& path, std::size_t dim) {
    const Table t = read_table(path);
    if (t.columns() != dim)
        fail(ErrorKind::Data, path + ": expected " + std::to_string(dim) + " input columns, found " +
                                  std::to_string(t.columns()));
    std::vector<double> out;
    for (const auto& r : t.rows) out.insert(out.end(), r.begin(), r.end());
    return out;
}

// ---- problem setup ----------------------------------------------------

struct Problem {
    std::size_t dim = 1;
    MeanModel mean;
    double offset = 0.0; // fixed mean value, subtracted from y
    // one-dimensional
    std::vector<double> knots;
    // grids
    std::optional<GridDesign> design;
    std::vector<double> y;
    std::vector<double> points;
};

Problem make_problem(const RunConfig& c, const Dataset& data) {
    Problem pb;
    pb.dim = data.dim;
    pb.mean = c.mean.kind == MeanSpec::Kind::Profile ? MeanModel::constant() : MeanModel::none();
    pb.offset = c.mean.kind == MeanSpec::Kind::Value ? c.mean.value : 0.0;
    const std::size_t n = data.size();
    const std::size_t d = data.dim;
    auto point = [&](std::size_t i) { return std::vector<double>(data.x.begin() + i * d, data.x.begin() + (i + 1) * d); };

    switch (c.design.kind) {
    case DesignSpec::Kind::Raw: {
        if (d != 1) fail(ErrorKind::Parameter, "raw designs are one-dimensional; use --design grid or sparse");
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return data.x[a] < data.x[b]; });
        for (std::size_t t = 0; t < n; ++t) {
            const std::size_t i = order[t];
            if (t > 0 && data.x[i] == pb.knots.back())
                fail(ErrorKind::DegenerateDesign, "duplicate input " + format_number(data.x[i]) + " on lines " +
                                                      std::to_string(data.lines[order[t - 1]]) + " and " +
                                                      std::to_string(data.lines[i]));
            pb.knots.push_back(data.x[i]);
            pb.y.push_back(data.y[i] - pb.offset);
        }
        pb.points = pb.knots;
        break;
    }
    case DesignSpec::Kind::Grid: {
        std::vector<std::vector<double>> axes(d);
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t i = 0; i < n; ++i) axes[j].push_back(data.x[i * d + j]);
            std::sort(axes[j].begin(), axes[j].end());
            axes[j].erase(std::unique(axes[j].begin(), axes[j].end()), axes[j].end());
        }
        FullGridDesign grid = make_full_grid(axes);
        if (grid.size() != n)
            fail(ErrorKind::Design, std::to_string(n) + " rows do not form a full grid of " +
                                        std::to_string(grid.size()) + " points");
        std::vector<double> y(n);
        std::vector<std::size_t> seen(n, 0);
        std::vector<std::size_t> multi(d);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j)
                multi[j] = static_cast<std::size_t>(
                    std::lower_bound(axes[j].begin(), axes[j].end(), data.x[i * d + j]) - axes[j].begin());
            const std::size_t idx = grid.flat_index(multi);
            if (seen[idx]) fail(ErrorKind::Design, "line " + std::to_string(data.lines[i]) + " repeats the grid point of line " +
                                                       std::to_string(seen[idx]));
            seen[idx] = data.lines[i];
            y[idx] = data.y[i] - pb.offset;
        }
        pb.points = grid.points();
        pb.y = std::move(y);
        pb.design = std::move(grid);
        break;
    }
    case DesignSpec::Kind::Sparse: {
        SparseGridDesign sg;
        if (!c.manifest_in.empty()) {
            sg = read_sparse_manifest(read_file(c.manifest_in));
        } else {
            const auto family = family_by_name(c.design.family);
            if (!family) fail(ErrorKind::Parameter, "unknown sparse-grid family '" + c.design.family + "'");
            sg = make_sparse_grid(d, c.design.level, *family);
        }
        if (sg.dim != d)
            fail(ErrorKind::Design, "sparse grid has dimension " + std::to_string(sg.dim) + " but the data has " +
                                        std::to_string(d));
        std::map<std::vector<double>, std::size_t> lookup;
        for (std::size_t i = 0; i < sg.size(); ++i)
            lookup.emplace(std::vector<double>(sg.points.begin() + i * d, sg.points.begin() + (i + 1) * d), i);
        std::vector<double> y(sg.size());
        std::vector<std::size_t> seen(sg.size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto it = lookup.find(point(i));
            if (it == lookup.end())
                fail(ErrorKind::Design, "line " + std::to_string(data.lines[i]) + ": point is not on the sparse grid");
            if (seen[it->second])
                fail(ErrorKind::Design, "line " + std::to_string(data.lines[i]) + " repeats the point of line " +
                                            std::to_string(seen[it->second]));
            seen[it->second] = data.lines[i];
            y[it->second] = data.y[i] - pb.offset;
        }
        for (std::size_t i = 0; i < sg.size(); ++i)
            if (!seen[i]) fail(ErrorKind::Design, "sparse grid point " + std::to_string(i + 1) + " has no observation");
        pb.points = sg.points;
        pb.y = std::move(y);
        pb.design = std::move(sg);
        break;
    }
    }
    return pb;
}

// ---- estimation and fitting ------------------------------------------

struct Params {
    double omega = 0.0;
    double nugget = 0.0;
    std::optional<MleResult> mle;
};

MleOptions mle_options(const RunConfig& c) {
    MleOptions o;
    o.estimate_nugget = c.nugget.estimate;
    o.nugget_ratio = c.nugget.ratio;
    o.seed = c.seed;
    o.precision = c.precision;
    return o;
}

Params resolve_params(const RunConfig& c, const Problem& pb) {
    Params out;
    out.nugget = c.nugget.ratio;
    if (c.kernel.omega) {
        out.omega = *c.kernel.omega;
        return out;
    }
    MleResult r = pb.design ? profile_mle_grid(c.kernel.p, *pb.design, pb.y, pb.mean, mle_options(c))
                            : profile_mle_1d(c.kernel.p, pb.knots, pb.y, pb.mean, mle_options(c));
    out.omega = r.omega_hat;
    if (r.nugget_ratio_hat) out.nugget = *r.nugget_ratio_hat;
    out.mle = std::move(r);
    return out;
}

struct Fit {
    std::optional<Gp1dModel> model1d;
    std::optional<GridGpModel> grid;
    std::vector<double> beta;
    double sigma2 = 0.0;
    Precision precision = Precision::Double;
};

Fit fit(const RunConfig& c, const Problem& pb, const Params& params) {
    Fit f;
    if (pb.design) {
        GridFitOptions opts;
        opts.precision = c.precision;
        f.grid.emplace(fit_grid(ProductKernel::isotropic(pb.dim, c.kernel.p, params.omega), *pb.design, pb.y, pb.mean, opts));
        f.beta.assign(f.grid->beta().begin(), f.grid->beta().end());
        f.sigma2 = f.grid->sigma2();
        f.precision = f.grid->precision();
    } else {
        FitOptions opts;
        opts.nugget_ratio = params.nugget;
        opts.precision = c.precision;
        f.model1d.emplace(fit_1d(HalfIntegerMatern(c.kernel.p, params.omega), pb.knots, pb.y, pb.mean, opts));
        f.beta.assign(f.model1d->beta().begin(), f.model1d->beta().end());
        f.sigma2 = f.model1d->sigma2();
        f.precision = f.model1d->precision();
    }
    return f;
}

json beta_json(const Problem& pb, const Fit& f) {
    if (pb.offset != 0.0 || f.beta.empty()) return pb.offset != 0.0 ? numbers(std::vector<double>{pb.offset}) : json::array();
    return numbers(f.beta);
}

void report_params(Output& out, const Problem& pb, const Params& params, const Fit& f) {
    out.results["omega"] = number(params.omega);
    out.results["nugget"] = number(params.nugget);
    out.results["sigma2"] = number(f.sigma2);
    out.results["beta"] = beta_json(pb, f);
    out.results["working_precision"] = kpgp::to_string(f.precision);
    out.results["n_train"] = pb.y.size();
}

void report_mle(Output& out, const MleResult& r) {
    out.results["mle_loglik"] = number(r.loglik_value);
    out.results["mle_iterations"] = r.iterations;
    out.results["mle_evaluations"] = r.evaluations;
    out.results["mle_converged"] = r.converged;
    out.results["mle_boundary"] = r.boundary;
}

void report_loglik(Output& out, const RunConfig& c, const Problem& pb, const Params& params, const Fit& f) {
    if (f.grid) {
        const GridLogLik ll = grid_loglik(*f.grid);
        out.results["loglik"] = number(ll.value);
        out.results["logdet_k"] = number(ll.logdet_k);
        out.results["quadratic"] = number(ll.quadratic);
        return;
    }
    const LogLikTerms t = log_likelihood_1d(HalfIntegerMatern(c.kernel.p, params.omega), pb.knots, pb.y, pb.mean,
                                            f.beta, f.sigma2, params.nugget, c.precision);
    out.results["loglik"] = number(t.value);
    out.results[params.nugget == 0.0 ? "logdet_phi" : "logdet_phi_plus_eta_a"] = number(t.logdet_m);
    out.results["logdet_a"] = number(t.logdet_a);
    out.results["logdet_k"] = number(t.logdet_m - t.logdet_a);
    out.results["quadratic"] = number(t.quadratic);
}

struct Prediction {
    std::vector<double> mean;
    std::vector<double> variance;
};

Prediction predict(const Problem& pb, const Fit& f, std::span<const double> xs) {
    Prediction p;
    if (f.grid) {
        GridPrediction g = predict_grid(*f.grid, xs);
        p.mean = std::move(g.mean);
        p.variance = std::move(g.variance);
    } else {
        const bool sorted = std::is_sorted(xs.begin(), xs.end());
        p.mean = predict_mean(*f.model1d, xs, sorted);
        p.variance = predict_variance(*f.model1d, xs);
    }
    for (double& m : p.mean) m += pb.offset;
    return p;
}

// ---- commands ----------------------------------------------------------

Output cmd_fit_predict(const RunConfig& c) {
    const Dataset data = load_training(c.train);
    const Problem pb = make_problem(c, data);
    const std::vector<double> xs = load_inputs(c.test, pb.dim);
    const Params params = resolve_params(c, pb);
    const Fit f = fit(c, pb, params);
    const Prediction pred = predict(pb, f, xs);

    Output out;
    report_params(out, pb, params, f);
    if (params.mle) report_mle(out, *params.mle);
    out.results["n_test"] = pred.mean.size();

    std::optional<DensePrediction> oracle;
    if (c.oracle) {
        DenseGpProblem dp{ProductKernel::isotropic(pb.dim, c.kernel.p, params.omega), pb.points, pb.y, pb.mean,
                          f.beta, f.sigma2, params.nugget};
        oracle = dense_predict(dp, xs);
        for (double& m : oracle->mean) m += pb.offset;
        double dev = 0.0;
        for (std::size_t i = 0; i < pred.mean.size(); ++i) dev = std::max(dev, std::fabs(pred.mean[i] - oracle->mean[i]));
        out.results["oracle_max_abs_mean_diff"] = number(dev);
    }

    Section s{"predictions", {}, {}};
    for (std::size_t j = 0; j < pb.dim; ++j) s.columns.push_back(pb.dim == 1 ? "x" : "x" + std::to_string(j + 1));
    s.columns.insert(s.columns.end(), {"mean", "sd"});
    if (oracle) s.columns.insert(s.columns.end(), {"oracle_mean", "oracle_sd"});
    for (std::size_t i = 0; i < pred.mean.size(); ++i) {
        std::vector<json> row;
        for (std::size_t j = 0; j < pb.dim; ++j) row.push_back(number(xs[i * pb.dim + j]));
        row.push_back(number(pred.mean[i]));
        row.push_back(number(std::sqrt(pred.variance[i])));
        if (oracle) {
            row.push_back(number(oracle->mean[i]));
            row.push_back(number(std::sqrt(std::max(oracle->variance[i], 0.0))));
        }
        s.rows.push_back(std::move(row));
    }
    out.sections.push_back(std::move(s));
    if (!c.manifest_out.empty()) write_file(c.manifest_out, write_sparse_manifest(std::get<SparseGridDesign>(*pb.design)));
    return out;
}

Output cmd_loglik(const RunConfig& c) {
    const Problem pb = make_problem(c, load_training(c.train));
    const Params params = resolve_params(c, pb);
    const Fit f = fit(c, pb, params);
    Output out;
    report_params(out, pb, params, f);
    report_loglik(out, c, pb, params, f);
    if (!c.manifest_out.empty()) write_file(c.manifest_out, write_sparse_manifest(std::get<SparseGridDesign>(*pb.design)));
    return out;
}

Output cmd_mle(const RunConfig& c) {
    const Problem pb = make_problem(c, load_training(c.train));
    const Params params = resolve_params(c, pb);
    const Fit f = fit(c, pb, params);
    Output out;
    report_params(out, pb, params, f);
    report_mle(out, *params.mle);
    report_loglik(out, c, pb, params, f);

    // profile likelihood over 20 log-spaced omegas in the search box, nugget at its estimate
    double range = 0.0;
    for (std::size_t j = 0; j < pb.dim; ++j) {
        double a = std::numeric_limits<double>::infinity(), b = -a;
        for (std::size_t i = j; i < pb.points.size(); i += pb.dim) {
            a = std::min(a, pb.points[i]);
            b = std::max(b, pb.points[i]);
        }
        range = std::max(range, b - a);
    }
    const double lo = 0.01 * range, hi = 10.0 * range;
    Section s{"sweep", {"omega", "loglik"}, {}};
    for (int t = 0; t < 20; ++t) {
        const double omega = lo * std::pow(hi / lo, t / 19.0);
        double ll = -std::numeric_limits<double>::infinity();
        try {
            ll = pb.design ? profile_loglik_grid(c.kernel.p, omega, *pb.design, pb.y, pb.mean, c.precision).loglik
                           : profile_loglik_1d(c.kernel.p, omega, params.nugget, pb.knots, pb.y, pb.mean, c.precision).loglik;
        } catch (const Error&) {
        }
        s.rows.push_back({number(omega), number(ll)});
    }
    out.sections.push_back(std::move(s));
    return out;
}

Output cmd_kp_dump(const RunConfig& c) {
    const Table t = read_table(c.train);
    if (t.columns() < 1 || t.rows.empty()) fail(ErrorKind::Data, c.train + ": no knots");
    const std::vector<double> knots = t.column(0);
    const KpBasis basis = build_basis(HalfIntegerMatern(c.kernel.p, *c.kernel.omega), knots);

    std::vector<double> mesh;
    if (!c.test.empty()) {
        mesh = read_table(c.test).column(0);
    } else {
        const double range = knots.back() - knots.front();
        const double a = knots.front() - 0.1 * range, b = knots.back() + 0.1 * range;
        for (std::size_t i = 0; i < c.mesh_size; ++i)
            mesh.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(c.mesh_size - 1));
    }

    Output out;
    std::size_t counts[3] = {0, 0, 0};
    Section coef{"basis", {"j", "kind", "window_start", "window_len", "coeffs"}, {}};
    for (std::size_t j = 0; j < basis.size(); ++j) {
        ++counts[static_cast<int>(basis.kind(j))];
        coef.rows.push_back({j + 1, to_string(basis.kind(j)), basis.window_start(j) + 1, basis.window_length(j),
                             numbers(basis.coefficients(j))});
    }
    out.results["n_knots"] = basis.size();
    out.results["degree"] = basis.kernel().degree();
    out.results["left"] = counts[static_cast<int>(KpKind::Left)];
    out.results["central"] = counts[static_cast<int>(KpKind::Central)];
    out.results["right"] = counts[static_cast<int>(KpKind::Right)];

    Section values{"values", {"x"}, {}};
    for (std::size_t j = 0; j < basis.size(); ++j) values.columns.push_back("phi" + std::to_string(j + 1));
    for (double x : mesh) {
        std::vector<json> row{number(x)};
        for (std::size_t j = 0; j < basis.size(); ++j) row.push_back(number(basis.value(j, x)));
        values.rows.push_back(std::move(row));
    }
    out.sections.push_back(std::move(coef));
    out.sections.push_back(std::move(values));
    return out;
}

double bench_target(double x) { return std::sin(2.0 * std::numbers::pi * x) + 0.5 * x; }

Output cmd_bench(const RunConfig& c) {
    using clock = std::chrono::steady_clock;
    const std::vector<std::size_t> sizes = c.sizes.empty() ? parse_sizes("10:14") : c.sizes;
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> xs(c.test_points);
    for (double& x : xs) x = unif(rng);
    std::sort(xs.begin(), xs.end());
    std::vector<double> truth(xs.size());
    std::transform(xs.begin(), xs.end(), truth.begin(), bench_target);

    const HalfIntegerMatern kern(c.kernel.p, *c.kernel.omega);
    const MeanModel mean = c.mean.kind == MeanSpec::Kind::Profile ? MeanModel::constant() : MeanModel::none();
    const double offset = c.mean.kind == MeanSpec::Kind::Value ? c.mean.value : 0.0;
    Output out;
    Section s{"bench",
              {"n", "precision", "fit_seconds", "predict_seconds", "total_seconds", "storage_bytes", "oracle_max_abs_diff", "mse"},
              {}};
    for (std::size_t n : sizes) {
        std::vector<double> knots(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            knots[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
            y[i] = bench_target(knots[i]) - offset;
        }
        FitOptions opts;
        opts.nugget_ratio = c.nugget.ratio;
        opts.precision = c.precision;
        const auto t0 = clock::now();
        const Gp1dModel model = fit_1d(kern, knots, y, mean, opts);
        const auto t1 = clock::now();
        std::vector<double> m = predict_mean(model, xs, true);
        const std::vector<double> v = predict_variance(model, xs);
        const auto t2 = clock::now();
        for (double& e : m) e += offset;

        json dev = nullptr;
        if (n <= c.oracle_max) {
            DenseGpProblem dp{ProductKernel({kern}), knots, y, mean,
                              std::vector<double>(model.beta().begin(), model.beta().end()), model.sigma2(), c.nugget.ratio};
            const DensePrediction o = dense_predict(dp, xs);
            double worst = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i) worst = std::max(worst, std::fabs(m[i] - (o.mean[i] + offset)));
            dev = worst;
        }
        double mse = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) mse += (m[i] - truth[i]) * (m[i] - truth[i]);
        mse /= static_cast<double>(xs.size());
        (void)v;
        const double fit_s = std::chrono::duration<double>(t1 - t0).count();
        const double pred_s = std::chrono::duration<double>(t2 - t1).count();
        s.rows.push_back({n, kpgp::to_string(model.precision()), fit_s, pred_s, fit_s + pred_s, model.storage_bytes(), dev,
                          number(mse)});
    }
    out.sections.push_back(std::move(s));
    return out;
}

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Parameter: return kConfigError;
    case ErrorKind::DegenerateDesign:
    case ErrorKind::InsufficientData:
    case ErrorKind::Design:
    case ErrorKind::Data: return kDataError;
    case ErrorKind::Conditioning:
    case ErrorKind::SingularMatrix:
    case ErrorKind::NumericalBreakdown:
    case ErrorKind::CollinearRegressors:
    case ErrorKind::OptimizationFailure: return kNumericalError;
    }
    return kNumericalError;
}

struct RawOptions {
    std::string kernel = "p=1,omega=mle";
    std::string nugget = "0";
    std::string mean = "profile";
    std::string design = "raw";
    std::string format = "table";
    std::string precision = "auto";
    std::string sizes;
};

void add_common(CLI::App* sub, RunConfig& c, RawOptions& raw) {
    sub->add_option("--kernel", raw.kernel, "p=<int>,omega=<real|mle>")->capture_default_str();
    sub->add_option("--nugget", raw.nugget, "noise-to-signal ratio eta, or mle")->capture_default_str();
    sub->add_option("--mean", raw.mean, "profile, a fixed value, or none")->capture_default_str();
    sub->add_option("--design", raw.design, "raw, grid or sparse:<family>,<level>")->capture_default_str();
    sub->add_option("--train", c.train, "training data (x1..xd,y) or knots");
    sub->add_option("--test", c.test, "prediction inputs or mesh");
    sub->add_option("--out", c.out, "output path (default stdout)");
    sub->add_option("--format", raw.format, "table or records")->capture_default_str();
    sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
    sub->add_option("--precision", raw.precision, "auto, double, long-double or quad")->capture_default_str();
    sub->add_option("--manifest", c.manifest_in, "sparse-grid manifest defining the design");
    sub->add_option("--manifest-out", c.manifest_out, "write the sparse-grid manifest here");
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Exact Gaussian-process regression with kernel packets"};
    app.require_subcommand(1);
    RunConfig c;
    RawOptions raw;
    std::map<std::string, CLI::App*> subs;
    for (const char* name : {"fit-predict", "loglik", "mle", "kp-dump", "bench"}) {
        const char* help = "";
        if (std::string_view(name) == "fit-predict") help = "fit on --train and predict at --test";
        else if (std::string_view(name) == "loglik") help = "log likelihood at fixed omega and nugget";
        else if (std::string_view(name) == "mle") help = "profile maximum likelihood estimate of omega (and nugget)";
        else if (std::string_view(name) == "kp-dump") help = "kernel packet basis table and sampled values";
        else help = "timing and accuracy ladder on equally spaced data";
        CLI::App* sub = app.add_subcommand(name, help);
        add_common(sub, c, raw);
        subs[name] = sub;
    }
    subs["fit-predict"]->add_flag("--oracle", c.oracle, "also report dense reference predictions");
    subs["kp-dump"]->add_option("--mesh", c.mesh_size, "number of mesh points without --test")->capture_default_str();
    subs["bench"]->add_option("--sizes", raw.sizes, "sizes, or a:b for 2^a..2^b (default 10:14)");
    subs["bench"]->add_option("--test-points", c.test_points, "random prediction points")->capture_default_str();
    subs["bench"]->add_option("--oracle-max", c.oracle_max, "largest n compared with the dense oracle")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "kpgp: " << e.what() << "\n";
        return kConfigError;
    }
    for (const auto& [name, sub] : subs)
        if (sub->parsed()) c.command = name;

    try {
        c.kernel = parse_kernel_spec(raw.kernel);
        c.nugget = parse_nugget_spec(raw.nugget);
        c.mean = parse_mean_spec(raw.mean);
        c.design = parse_design_spec(raw.design);
        c.format = parse_format(raw.format);
        const auto prec = parse_precision(raw.precision);
        if (!prec) fail(ErrorKind::Parameter, "--precision: expected auto, double, long-double or quad");
        c.precision = *prec;
        if (!raw.sizes.empty()) c.sizes = parse_sizes(raw.sizes);
        validate(c);

        Output result;
        if (c.command == "fit-predict") result = cmd_fit_predict(c);
        else if (c.command == "loglik") result = cmd_loglik(c);
        else if (c.command == "mle") result = cmd_mle(c);
        else if (c.command == "kp-dump") result = cmd_kp_dump(c);
        else result = cmd_bench(c);

        const std::string text = render(c, result);
        if (c.out.empty()) out << text;
        else write_file(c.out, text);
        return kSuccess;
    } catch (const Error& e) {
        err << "kpgp: " << to_string(e.kind()) << ": " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        err << "kpgp: error: " << e.what() << "\n";
        return kNumericalError;
    }
}

} // namespace kpgp::cli
