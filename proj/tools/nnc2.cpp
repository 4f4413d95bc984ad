// nnc2: command-line front end for nonnegative C^2 interpolation and trace-norm estimation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "nnc2/nnc2.hpp"

using nlohmann::json;
using namespace nnc2;

namespace {

struct Flags {
    int k = 4;
    double c_nice = 1000;
    double tol = 1e-6;
    int grid = 512;
    double radius_cap = 16;
    int dirs = 64;
    bool is_signed = false;
    std::string input, out, samples;
};

struct Table {
    std::vector<std::vector<double>> rows;
};

std::string trim(std::string s) {
    auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

// CSV with a required header naming exactly `cols`.
Table read_csv(const std::string& path, const std::vector<std::string>& cols) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::string line;
    int ln = 0;
    bool header = false;
    Table t;
    while (std::getline(in, line)) {
        ++ln;
        if (ln == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line = line.substr(3);
        if (trim(line).empty()) continue;
        auto cells = split(line);
        if (!header) {
            if (cells != cols) {
                std::string want;
                for (const auto& c : cols) want += (want.empty() ? "" : ",") + c;
                throw InputError(path + ":" + std::to_string(ln) + ": expected header '" + want + "'");
            }
            header = true;
            continue;
        }
        if (cells.size() != cols.size())
            throw InputError(path + ":" + std::to_string(ln) + ": expected " + std::to_string(cols.size()) + " fields");
        std::vector<double> row;
        for (const auto& c : cells) {
            std::size_t used = 0;
            double v = 0;
            try {
                v = std::stod(c, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (c.empty() || used != c.size() || !std::isfinite(v))
                throw InputError(path + ":" + std::to_string(ln) + ": malformed number '" + c + "'");
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    if (!header) throw InputError(path + ": missing header");
    if (t.rows.empty()) throw InputError(path + ": no data rows");
    return t;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << text;
}

std::string dump(const json& j) { return j.dump(1) + "\n"; }

std::string default_path(const std::string& input, const std::string& suffix) {
    std::filesystem::path p(input);
    return (p.parent_path() / (p.stem().string() + suffix)).string();
}

AssembleOptions assemble_options(const Flags& fl) {
    if (fl.k < 1) throw InputError("--k must be positive");
    if (!(fl.c_nice > 0)) throw InputError("--cnice must be positive");
    if (!(fl.tol > 0)) throw InputError("--tol must be positive");
    if (!(fl.radius_cap > 0)) throw InputError("--radius-cap must be positive");
    if (fl.dirs < 4) throw InputError("--dirs must be at least 4");
    AssembleOptions o;
    o.cz.k = fl.k;
    o.cz.c_nice = fl.c_nice;
    o.cz.radius_cap = fl.radius_cap;
    o.cz.dirs = fl.dirs;
    o.tol = fl.tol;
    return o;
}

void reject_signed(const Flags& fl, const char* cmd) {
    if (fl.is_signed) throw InputError(std::string("--signed is not accepted by ") + cmd);
}

void read_2d(const Flags& fl, std::vector<Vec2>& E, std::vector<double>& f) {
    auto t = read_csv(fl.input, {"x", "y", "f"});
    for (const auto& r : t.rows) {
        if (r[2] < 0) throw InputError("negative value f = " + num(r[2]) + " (nonnegative data required)");
        E.push_back({r[0], r[1]});
        f.push_back(r[2]);
    }
    std::vector<Vec2> s = E;
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw InputError("duplicate point in input");
}

void check_grid(const Flags& fl) {
    if (fl.grid < 2) throw InputError("--grid must be at least 2");
}

int cmd_interpolate1d(const Flags& fl) {
    check_grid(fl);
    auto t = read_csv(fl.input, {"x", "f"});
    std::sort(t.rows.begin(), t.rows.end());
    std::vector<double> xs, fs;
    for (const auto& r : t.rows) {
        if (!xs.empty() && r[0] == xs.back()) throw InputError("duplicate x = " + num(r[0]));
        if (r[1] < 0 && !fl.is_signed) throw InputError("negative value f = " + num(r[1]) + " (use --signed)");
        xs.push_back(r[0]);
        fs.push_back(r[1]);
    }
    FuncExpr F;
    double triple_max = 0;
    if (fl.is_signed) {
        F = Operator1D(xs, fl.tol).apply_linear(fs);
        std::size_t T = xs.size() <= 3 ? 1 : xs.size() - 2, len = std::min<std::size_t>(xs.size(), 3);
        for (std::size_t j = 0; j < T; ++j) {
            std::vector<Vec2> P;
            std::vector<double> V;
            for (std::size_t a = 0; a < len; ++a) P.push_back({xs[j + a], 0}), V.push_back(fs[j + a]);
            triple_max = std::max(triple_max, trace_norm_small(P, V, false, fl.tol, 1).upper);
        }
    } else {
        auto ip = build_1d_nonneg(xs, fs, fl.tol);
        F = ip.F;
        for (double v : ip.triple_norm) triple_max = std::max(triple_max, v);
    }
    double err = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) err = std::max(err, std::abs(F->eval({xs[i], 0}).v - fs[i]));
    double lo = xs.front() - 1, hi = xs.back() + 1, mn = HUGE_VAL, nrm = 0, d2 = 0;
    std::string csv = "x,F,F',F''\n";
    for (int i = 0; i < fl.grid; ++i) {
        double x = lo + (hi - lo) * i / (fl.grid - 1);
        J2 j = F->eval({x, 0});
        mn = std::min(mn, j.v);
        nrm = std::max(nrm, c2_pointwise(j, 1));
        d2 = std::max(d2, std::abs(j.hxx));
        csv += num(x) + "," + num(j.v) + "," + num(j.gx) + "," + num(j.hxx) + "\n";
    }
    write_text(fl.out.empty() ? default_path(fl.input, ".interp.json") : fl.out, dump(funcexpr_to_json(F)));
    write_text(fl.samples.empty() ? default_path(fl.input, ".samples.csv") : fl.samples, csv);
    json rep = {{"format_version", 1},
                {"n", xs.size()},
                {"max_data_error", err},
                {"min_sampled_F", mn},
                {"sampled_c2_norm", nrm},
                {"max_abs_F2", d2},
                {"triple_norm_max", triple_max}};
    std::cout << dump(rep);
    return 0;
}

int cmd_interpolate2d(const Flags& fl) {
    reject_signed(fl, "interpolate2d");
    check_grid(fl);
    std::vector<Vec2> E;
    std::vector<double> f;
    read_2d(fl, E, f);
    auto ip = interpolate_2d(E, f, assemble_options(fl));
    double err = 0;
    for (std::size_t i = 0; i < E.size(); ++i) err = std::max(err, std::abs(ip.F->eval(E[i]).v - f[i]));
    write_text(fl.out.empty() ? default_path(fl.input, ".interp.json") : fl.out, dump(funcexpr_to_json(ip.F)));
    double mn = HUGE_VAL, nrm = 0;
    Square H = inflated_hull(E);
    std::string csv;
    bool want_csv = !fl.samples.empty();
    if (want_csv) csv = "x,y,F,Fx,Fy,Fxx,Fxy,Fyy\n";
    for (int a = 0; a < fl.grid; ++a)
        for (int b = 0; b < fl.grid; ++b) {
            Vec2 x{H.lo[0] + H.side * a / (fl.grid - 1), H.lo[1] + H.side * b / (fl.grid - 1)};
            J2 j = ip.F->eval(x);
            mn = std::min(mn, j.v);
            nrm = std::max(nrm, c2_pointwise(j));
            if (want_csv)
                csv += num(x[0]) + "," + num(x[1]) + "," + num(j.v) + "," + num(j.gx) + "," + num(j.gy) + "," + num(j.hxx) +
                       "," + num(j.hxy) + "," + num(j.hyy) + "\n";
        }
    if (want_csv) write_text(fl.samples, csv);
    json rep = {{"format_version", 1},
                {"n", E.size()},
                {"M_est", ip.M},
                {"squares", ip.cover.squares.size()},
                {"clusters", ip.clusters.clusters.size()},
                {"max_data_error", err},
                {"min_sampled_F", mn},
                {"sampled_c2_norm", nrm},
                {"norm_ratio", ip.M > 0 ? nrm / ip.M : 0.0}};
    std::cout << dump(rep);
    return 0;
}

int cmd_tracenorm(const Flags& fl) {
    reject_signed(fl, "tracenorm");
    std::vector<Vec2> E;
    std::vector<double> f;
    read_2d(fl, E, f);
    auto tn = trace_norm_estimate(E, f, assemble_options(fl));
    json pts = json::array();
    if (tn.argmax >= 0)
        for (int i : tn.clusters.clusters[std::size_t(tn.argmax)].points) pts.push_back({E[i][0], E[i][1]});
    json rep = {{"format_version", 1},
                {"M_est", tn.M_est},
                {"L", tn.clusters.clusters.size()},
                {"max_cluster_size", tn.clusters.max_size},
                {"argmax_cluster", pts}};
    write_text(fl.out.empty() ? "-" : fl.out, dump(rep));
    return 0;
}

int cmd_decompose(const Flags& fl) {
    reject_signed(fl, "decompose");
    std::vector<Vec2> E;
    std::vector<double> f;
    read_2d(fl, E, f);
    auto cv = decompose(E, assemble_options(fl).cz);
    json sq = json::array();
    for (const auto& s : cv.squares) {
        json mu = s.mu >= 0 ? json{{"corner", {cv.squares[std::size_t(s.mu)].sq.lo()[0], cv.squares[std::size_t(s.mu)].sq.lo()[1]}},
                                   {"level", cv.squares[std::size_t(s.mu)].sq.level}}
                            : json(nullptr);
        sq.push_back({{"corner", {s.sq.lo()[0], s.sq.lo()[1]}},
                      {"level", s.sq.level},
                      {"flags", {{"sharp", s.sharp}, {"keystone", s.keystone}, {"special", s.special}}},
                      {"x_sharp", {s.x_sharp[0], s.x_sharp[1]}},
                      {"mu_target", mu}});
    }
    write_text(fl.out.empty() ? "-" : fl.out, dump({{"format_version", 1}, {"squares", sq}}));
    return 0;
}

int cmd_eval(const Flags& fl, const std::string& points) {
    reject_signed(fl, "eval");
    std::ifstream in(fl.input);
    if (!in) throw InputError("cannot open '" + fl.input + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(fl.input + ": " + e.what());
    }
    FuncExpr F = funcexpr_from_json(doc);
    std::ifstream probe(points);
    std::string head;
    if (!probe || !std::getline(probe, head)) throw InputError("cannot read '" + points + "'");
    auto hc = split(head);
    bool one_d = hc == std::vector<std::string>{"x"};
    auto t = read_csv(points, one_d ? std::vector<std::string>{"x"} : std::vector<std::string>{"x", "y"});
    std::string csv = "x,y,F,Fx,Fy,Fxx,Fxy,Fyy\n";
    for (const auto& r : t.rows) {
        Vec2 x{r[0], one_d ? 0.0 : r[1]};
        J2 j = F->eval(x);
        csv += num(x[0]) + "," + num(x[1]) + "," + num(j.v) + "," + num(j.gx) + "," + num(j.gy) + "," + num(j.hxx) + "," +
               num(j.hxy) + "," + num(j.hyy) + "\n";
    }
    write_text(fl.out.empty() ? "-" : fl.out, csv);
    return 0;
}

int cmd_demo(const Flags& fl, int e_lo, int e_hi) {
    reject_signed(fl, "demo_nonadditivity");
    if (e_lo < 1 || e_hi < e_lo || e_hi > 30) throw InputError("exponent range must satisfy 1 <= from <= to <= 30");
    std::string csv = "eps,est_f,est_g,est_f_plus_g,max_abs_F2\n";
    for (int e = e_lo; e <= e_hi; ++e) {
        auto r = nonadditivity_demo(std::ldexp(1.0, -e), fl.tol);
        csv += num(r.eps) + "," + num(r.est_f) + "," + num(r.est_g) + "," + num(r.est_sum) + "," +
               num(r.max_second_derivative) + "\n";
    }
    write_text(fl.out.empty() ? "-" : fl.out, csv);
    return 0;
}

int cmd_generate(const Flags& fl, int n, int dim, unsigned seed, double zero_frac) {
    if (n < 1) throw InputError("--n must be positive");
    if (dim != 1 && dim != 2) throw InputError("--dim must be 1 or 2");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::string csv = dim == 1 ? "x,f\n" : "x,y,f\n";
    for (int i = 0; i < n; ++i) {
        double x = u(rng), y = dim == 2 ? u(rng) : 0, z = u(rng), v = u(rng);
        double f = z < zero_frac ? 0 : v;
        csv += num(x) + (dim == 2 ? "," + num(y) : "") + "," + num(f) + "\n";
    }
    write_text(fl.out.empty() ? "-" : fl.out, csv);
    return 0;
}

void add_common(CLI::App* c, Flags& fl, bool input = true) {
    if (input) c->add_option("input", fl.input, "input file")->required();
    c->add_option("--k", fl.k, "cluster size parameter k")->capture_default_str();
    c->add_option("--cnice", fl.c_nice, "niceness constant C_nice")->capture_default_str();
    c->add_option("--tol", fl.tol, "convex solver tolerance")->capture_default_str();
    c->add_option("--grid", fl.grid, "sample grid points (per axis in 2-D)")->capture_default_str();
    c->add_option("--radius-cap", fl.radius_cap, "sigma-diameter search radius, in square sides")->capture_default_str();
    c->add_option("--dirs", fl.dirs, "support-function directions")->capture_default_str();
    c->add_flag("--signed", fl.is_signed, "allow negative data (interpolate1d only)");
    c->add_option("-o,--out", fl.out, "output path ('-' for stdout)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonnegative C^2 interpolation and trace-norm estimation"};
    app.require_subcommand(1);
    Flags fl;
    std::string points;
    int e_lo = 3, e_hi = 8, n = 20, dim = 2;
    unsigned seed = 1;
    double zero_frac = 0.3;

    auto* i1 = app.add_subcommand("interpolate1d", "nonnegative (or --signed) 1-D interpolant; CSV header x,f");
    add_common(i1, fl);
    i1->add_option("--samples", fl.samples, "sample CSV path (default <input>.samples.csv)");
    auto* i2 = app.add_subcommand("interpolate2d", "nonnegative 2-D interpolant; CSV header x,y,f");
    add_common(i2, fl);
    i2->add_option("--samples", fl.samples, "optional sampled grid CSV");
    auto* tn = app.add_subcommand("tracenorm", "trace-norm estimate as JSON");
    add_common(tn, fl);
    auto* dc = app.add_subcommand("decompose", "cover dump as JSON");
    add_common(dc, fl);
    auto* ev = app.add_subcommand("eval", "evaluate an interpolant JSON at query points (CSV header x or x,y)");
    add_common(ev, fl);
    ev->add_option("points", points, "query CSV")->required();
    auto* dm = app.add_subcommand("demo_nonadditivity", "estimates for eps = 2^-from .. 2^-to");
    add_common(dm, fl, false);
    dm->add_option("--from", e_lo, "first exponent")->capture_default_str();
    dm->add_option("--to", e_hi, "last exponent")->capture_default_str();
    auto* gn = app.add_subcommand("generate", "random test data");
    add_common(gn, fl, false);
    gn->add_option("--n", n, "number of points")->capture_default_str();
    gn->add_option("--dim", dim, "1 or 2")->capture_default_str();
    gn->add_option("--seed", seed, "random seed")->capture_default_str();
    gn->add_option("--zero-fraction", zero_frac, "probability of a zero value")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    try {
        if (*i1) return cmd_interpolate1d(fl);
        if (*i2) return cmd_interpolate2d(fl);
        if (*tn) return cmd_tracenorm(fl);
        if (*dc) return cmd_decompose(fl);
        if (*ev) return cmd_eval(fl, points);
        if (*dm) return cmd_demo(fl, e_lo, e_hi);
        if (*gn) return cmd_generate(fl, n, dim, seed, zero_frac);
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const BudgetError& e) {
        std::cerr << "budget error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
    return 4;
}
