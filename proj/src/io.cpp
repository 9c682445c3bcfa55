#include "mixmom/io.hpp"

#include "mixmom/errors.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#ifndef MIXMOM_VERSION
#define MIXMOM_VERSION "0.0.0"
#endif

namespace mixmom {

extern const char* const kReferenceTablesJson;

namespace fs = std::filesystem;

namespace {

Json vector_json(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Json matrix_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
    return rows;
}

Eigen::VectorXd vector_from(const Json& j, const char* what) {
    if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array of numbers");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(std::string(what) + " must be an array of numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

std::string format_double(double x) {
    std::array<char, 32> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

std::string sci(double x) {
    if (!std::isfinite(x)) return "nan";
    std::ostringstream os;
    os << std::scientific << std::setprecision(1) << x;
    return os.str();
}

std::vector<std::string> parameter_labels(int d, int k) {
    std::vector<std::string> out;
    for (int j = 1; j < k; ++j) out.push_back("omega" + std::to_string(j));
    for (int j = 1; j <= k; ++j) out.push_back("b" + std::to_string(j));
    for (int j = 1; j <= k; ++j)
        for (int i = 1; i <= d; ++i) out.push_back("beta" + std::to_string(i) + "_" + std::to_string(j));
    return out;
}

Json errors_json(const SummedErrors& e) {
    return Json{{"p", e.p}, {"b", e.b}, {"beta", e.beta}};
}

}  // namespace

Json to_json(const Parameters& theta) {
    return Json{{"omega", vector_json(theta.omega)}, {"b", vector_json(theta.b)}, {"beta", matrix_json(theta.beta)}};
}

Parameters parameters_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("parameters must be a JSON object");
    for (const char* key : {"omega", "b", "beta"})
        if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
    Parameters p;
    p.omega = vector_from(j["omega"], "omega");
    p.b = vector_from(j["b"], "b");
    const Json& rows = j["beta"];
    if (!rows.is_array() || rows.empty()) throw ConfigError("beta must be a non-empty array of rows");
    const auto k = static_cast<Eigen::Index>(p.omega.size());
    p.beta.resize(static_cast<Eigen::Index>(rows.size()), k);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Eigen::VectorXd row = vector_from(rows[i], "beta row");
        if (row.size() != k) throw ConfigError("every beta row must have K entries");
        p.beta.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return p;
}

Json to_json(const EstimateReport& r, Link link) {
    const int d = r.theta_hat.dim();
    const int k = r.theta_hat.components();
    Json j;
    j["link"] = to_string(link);
    j["d"] = d;
    j["K"] = k;
    j["theta_hat"] = to_json(r.theta_hat);
    j["theta_init"] = to_json(r.theta_init);
    j["objective_value"] = r.objective_value;
    j["gradient_norm"] = r.gradient_norm;
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["w_updates"] = r.w_updates;
    j["w_jittered"] = r.w_jittered;
    j["parameter_order"] = parameter_labels(d, k);
    if (r.sigma_hat) {
        j["sigma_hat"] = matrix_json(*r.sigma_hat);
        j["standard_errors"] = vector_json(r.sigma_hat->diagonal().cwiseMax(0.0).cwiseSqrt());
    } else {
        j["sigma_hat"] = nullptr;
        j["standard_errors"] = nullptr;
    }
    j["g_diagnostics"] = matrix_json(r.regularity.g);
    j["h4_ok"] = r.regularity.h4_ok;
    j["h5_ok"] = r.regularity.h5_ok;
    j["timing"] = Json{{"wall_time", r.wall_time}, {"moment_time", r.moment_time}, {"optimize_time", r.optimize_time}};
    if (r.start_index >= 0) {
        j["random_starts"] = Json{{"selected", r.start_index}, {"initial_objectives", r.start_objectives}};
    }
    j["warnings"] = r.warnings;
    return j;
}

Json to_json(const DirectionEstimate& dir) {
    Json j;
    j["mu"] = matrix_json(dir.mu);
    j["diagonal_scores"] = vector_json(dir.diagonal_scores);
    j["signal"] = vector_json(dir.signal);
    j["diagonalization"] = Json{{"criterion", dir.diagonalization.criterion},
                                {"iterations", dir.diagonalization.iterations},
                                {"converged", dir.diagonalization.converged},
                                {"v", matrix_json(dir.diagonalization.v)}};
    j["warnings"] = dir.warnings;
    return j;
}

Json to_json(const ReplicationResult& rep) {
    Json j{{"n", rep.n}, {"replication", rep.replication}, {"seed", rep.seed}, {"ok", rep.ok}};
    if (rep.ok) {
        j["converged"] = rep.converged;
        j["estimate"] = to_json(rep.estimate);
        j["errors"] = errors_json(rep.errors);
        j["l1"] = rep.l1;
        j["objective_value"] = rep.objective_value;
    } else {
        j["error"] = rep.error;
    }
    j["wall_time"] = rep.wall_time;
    return j;
}

ExperimentConfig config_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    ExperimentConfig cfg;
    try {
        cfg.name = j.value("name", std::string("custom"));
        cfg.link = parse_link(j.value("link", std::string("logit")));
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    cfg.theta_star = parameters_from_json(j);
    if (j.contains("d") && j["d"].get<int>() != cfg.dim()) {
        throw ConfigError("config d = " + std::to_string(j["d"].get<int>()) + " does not match beta with " +
                          std::to_string(cfg.dim()) + " rows");
    }
    if (j.contains("K") && j["K"].get<int>() != cfg.components()) {
        throw ConfigError("config K does not match the number of weights");
    }
    try {
        if (j.contains("n_grid")) cfg.n_grid = j["n_grid"].get<std::vector<int>>();
        else cfg.n_grid = {100000};
        cfg.replications = j.value("replications", 100);
        cfg.seed = j.value("seed", std::uint64_t{1});
        cfg.trim_fraction = j.value("trim_fraction", 0.02);
        cfg.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

Json to_json(const ExperimentConfig& cfg) {
    Json j = to_json(cfg.theta_star);
    j["name"] = cfg.name;
    j["link"] = to_string(cfg.link);
    j["d"] = cfg.dim();
    j["K"] = cfg.components();
    j["n_grid"] = cfg.n_grid;
    j["replications"] = cfg.replications;
    j["seed"] = cfg.seed;
    j["trim_fraction"] = cfg.trim_fraction;
    return j;
}

Json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

ExperimentConfig read_config(const fs::path& path) {
    try {
        return config_from_json(read_json(path));
    } catch (const Json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    out.flush();
    if (!out) throw IoError("failed writing " + path.string());
}

void write_json(const fs::path& path, const Json& j) {
    write_text(path, j.dump(2) + "\n");
}

void write_dataset(const fs::path& path, const Dataset& data) {
    data.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    const int d = data.dim();
    for (int j = 0; j < d; ++j) out << 'x' << (j + 1) << ',';
    out << "y\n";
    std::string line;
    for (int i = 0; i < data.size(); ++i) {
        line.clear();
        for (int j = 0; j < d; ++j) {
            line += format_double(data.x(i, j));
            line += ',';
        }
        line += data.y[i] ? '1' : '0';
        line += '\n';
        out << line;
    }
    out.flush();
    if (!out) throw IoError("failed writing " + path.string());
}

Dataset read_dataset(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> header;
    std::stringstream hs(line);
    for (std::string field; std::getline(hs, field, ',');) header.push_back(field);
    const int d = static_cast<int>(header.size()) - 1;
    if (d < 1 || header.back() != "y") throw IoError(path.string() + ": header must be x1,...,xd,y");
    for (int j = 0; j < d; ++j)
        if (header[j] != "x" + std::to_string(j + 1)) throw IoError(path.string() + ": header must be x1,...,xd,y");

    std::vector<double> xs;
    std::vector<std::uint8_t> ys;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const char* p = line.data();
        const char* end = p + line.size();
        for (int j = 0; j <= d; ++j) {
            double v = 0.0;
            auto res = std::from_chars(p, end, v);
            if (res.ec != std::errc() || (j < d && (res.ptr == end || *res.ptr != ',')) || (j == d && res.ptr != end)) {
                throw IoError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
            }
            if (j < d) {
                if (!std::isfinite(v)) throw IoError(path.string() + ":" + std::to_string(line_no) + ": non-finite value");
                xs.push_back(v);
            } else {
                if (v != 0.0 && v != 1.0) throw IoError(path.string() + ":" + std::to_string(line_no) + ": y must be 0 or 1");
                ys.push_back(v == 1.0 ? 1 : 0);
            }
            p = res.ptr + 1;
        }
    }
    Dataset data;
    data.y = std::move(ys);
    data.x = Eigen::Map<RowMatrix>(xs.data(), static_cast<Eigen::Index>(data.y.size()), d);
    return data;
}

const Json& reference_tables() {
    static const Json tables = Json::parse(kReferenceTablesJson);
    return tables;
}

std::optional<ReferenceRow> reference_row(Link link, int experiment, int n) {
    const Json& t = reference_tables();
    const std::string l = to_string(link);
    const std::string e = std::to_string(experiment);
    const std::string key = std::to_string(n);
    if (!t.contains(l) || !t[l].contains(e) || !t[l][e].contains(key)) return std::nullopt;
    const Json& row = t[l][e][key];
    ReferenceRow r;
    r.p = row["p"].get<double>();
    r.b = row["b"].get<double>();
    r.beta = row["beta"].get<std::vector<double>>();
    return r;
}

std::string table_csv(const ErrorTable& table, int experiment) {
    const int k = table.components;
    std::ostringstream os;
    os << "n,replications,retained,failures,failure_rate,non_converged,mean_wall_time,err_p";
    for (int j = 1; j <= k; ++j) os << ",err_beta" << j;
    os << ",err_b,ref_p";
    for (int j = 1; j <= k; ++j) os << ",ref_beta" << j;
    os << ",ref_b\n";
    for (const auto& row : table.rows) {
        os << row.n << ',' << row.replications << ',' << row.retained << ',' << row.failures << ','
           << format_double(row.failure_rate()) << ',' << row.non_converged << ',' << format_double(row.mean_wall_time)
           << ',' << format_double(row.errors.p);
        for (double v : row.errors.beta) os << ',' << format_double(v);
        os << ',' << format_double(row.errors.b);
        const auto ref = experiment > 0 ? reference_row(table.link, experiment, row.n) : std::nullopt;
        if (ref && static_cast<int>(ref->beta.size()) == k) {
            os << ',' << format_double(ref->p);
            for (double v : ref->beta) os << ',' << format_double(v);
            os << ',' << format_double(ref->b);
        } else {
            for (int j = 0; j < k + 2; ++j) os << ',';
        }
        os << '\n';
    }
    return os.str();
}

std::string table_markdown(const ErrorTable& table, int experiment) {
    const int k = table.components;
    std::ostringstream os;
    os << "Summed errors, " << table.name << " (" << to_string(table.link) << " link).";
    if (experiment > 0) os << " Reference values in parentheses.";
    os << "\n\n| n | p |";
    for (int j = 1; j <= k; ++j) os << " beta" << j << " |";
    os << " b | failures |\n|---|---|";
    for (int j = 0; j < k; ++j) os << "---|";
    os << "---|---|\n";
    for (const auto& row : table.rows) {
        const auto ref = experiment > 0 ? reference_row(table.link, experiment, row.n) : std::nullopt;
        const bool with_ref = ref && static_cast<int>(ref->beta.size()) == k;
        auto cell = [&](double ours, double theirs) {
            std::string s = sci(ours);
            if (with_ref) s += " (" + sci(theirs) + ")";
            return s;
        };
        os << "| " << row.n << " | " << cell(row.errors.p, with_ref ? ref->p : 0.0) << " |";
        for (int j = 0; j < k; ++j) os << ' ' << cell(row.errors.beta[j], with_ref ? ref->beta[j] : 0.0) << " |";
        os << ' ' << cell(row.errors.b, with_ref ? ref->b : 0.0) << " | " << row.failures << '/' << row.replications
           << " |\n";
    }
    return os.str();
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw IoError("sha256 unavailable");
    }
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md.data(), &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

void write_manifest(const fs::path& dir, const std::string& command, const Json& arguments, std::uint64_t seed,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
    const fs::path root = fs::absolute(dir).lexically_normal();
    auto entry = [&](const fs::path& p) {
        const fs::path abs = fs::absolute(p).lexically_normal();
        const fs::path rel = abs.lexically_relative(root);
        const bool inside = !rel.empty() && *rel.begin() != "..";
        return Json{{"path", inside ? rel.generic_string() : abs.generic_string()}, {"sha256", sha256_file(abs)}};
    };
    Json j;
    j["tool"] = "mixmom";
    j["version"] = version_string();
    j["command"] = command;
    j["arguments"] = arguments;
    j["seed"] = seed;
    j["inputs"] = Json::array();
    for (const auto& p : inputs) j["inputs"].push_back(entry(p));
    j["outputs"] = Json::array();
    for (const auto& p : outputs) j["outputs"].push_back(entry(p));
    write_json(dir / "manifest.json", j);
}

std::vector<std::string> verify_manifest(const fs::path& dir) {
    const Json j = read_json(dir / "manifest.json");
    std::vector<std::string> bad;
    for (const char* group : {"inputs", "outputs"}) {
        if (!j.contains(group)) continue;
        for (const auto& e : j[group]) {
            const fs::path p = e["path"].get<std::string>();
            const fs::path full = p.is_absolute() ? p : dir / p;
            std::string actual;
            try {
                actual = sha256_file(full);
            } catch (const IoError&) {
                bad.push_back(p.generic_string());
                continue;
            }
            if (actual != e["sha256"].get<std::string>()) bad.push_back(p.generic_string());
        }
    }
    return bad;
}

std::string version_string() { return MIXMOM_VERSION; }

}  // namespace mixmom
