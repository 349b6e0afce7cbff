#include "ecc/energy_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ecc/checkpoint.hpp"
#include "ecc/errors.hpp"

namespace ecc {

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

double parse_real(const std::string& token, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (token.empty() || end != token.c_str() + token.size()) throw IoError(where + ": bad number '" + token + "'");
    return v;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, '\t')) out.push_back(cur);
    return out;
}

}  // namespace

std::string profile_header(const std::map<std::string, std::string>& meta, std::size_t num_layers) {
    std::string out = "# ecc-profile format_version=" + std::to_string(kProfileFormatVersion);
    for (const auto& [k, v] : meta) out += " " + k + "=" + v;
    out += "\n";
    for (std::size_t j = 0; j < num_layers; ++j) out += "s" + std::to_string(j + 1) + "\t";
    out += "s_out\tenergy\ttrials\tstdev\n";
    return out;
}

std::string profile_row(const EnergySample& sample) {
    std::string out;
    for (double v : sample.s.layers) out += format_real(v) + "\t";
    out += std::to_string(sample.s.n_out) + "\t" + format_real(sample.energy) + "\t" + std::to_string(sample.trials) +
           "\t" + format_real(sample.stdev) + "\n";
    return out;
}

void write_profile(const std::string& path, const Profile& profile) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write profile '" + path + "'");
    out << profile_header(profile.meta, profile.num_layers);
    for (const auto& s : profile.samples) out << profile_row(s);
    if (!out) throw IoError("failed writing profile '" + path + "'");
}

Profile read_profile(const std::string& path, bool drop_torn_tail) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open profile '" + path + "'");
    Profile p;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ecc-profile", 0) != 0) {
        throw IoError("'" + path + "' is not a profile (missing '# ecc-profile' line)");
    }
    {
        std::istringstream meta(line.substr(std::string("# ecc-profile").size()));
        std::string kv;
        while (meta >> kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw IoError("'" + path + "': bad metadata token '" + kv + "'");
            p.meta[kv.substr(0, eq)] = kv.substr(eq + 1);
        }
        if (p.meta["format_version"] != std::to_string(kProfileFormatVersion)) {
            throw IoError("'" + path + "': unsupported profile format version");
        }
        p.meta.erase("format_version");
    }
    if (!std::getline(in, line)) throw IoError("'" + path + "': missing column header");
    const auto columns = split_tabs(line);
    if (columns.size() < 5 || columns[columns.size() - 4] != "s_out") throw IoError("'" + path + "': bad column header");
    p.num_layers = columns.size() - 4;

    std::size_t lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (drop_torn_tail && in.eof()) break;  // no newline: the writer was interrupted mid-row
        const std::string where = path + ":" + std::to_string(lineno);
        const auto cells = split_tabs(line);
        if (cells.size() != columns.size()) throw IoError(where + ": expected " + std::to_string(columns.size()) + " columns");
        EnergySample s;
        for (std::size_t j = 0; j < p.num_layers; ++j) s.s.layers.push_back(parse_real(cells[j], where));
        s.s.n_out = static_cast<std::size_t>(parse_real(cells[p.num_layers], where));
        s.energy = parse_real(cells[p.num_layers + 1], where);
        s.trials = static_cast<std::size_t>(parse_real(cells[p.num_layers + 2], where));
        s.stdev = parse_real(cells[p.num_layers + 3], where);
        p.samples.push_back(std::move(s));
    }
    return p;
}

void write_energy_model(const std::string& path, const EnergyModelFile& file) {
    nlohmann::json j{{"format_version", kEnergyModelFormatVersion},
                     {"num_layers", file.model.num_layers()},
                     {"a0", file.model.a0},
                     {"a", file.model.a},
                     {"feature_scale", file.feature_scale},
                     {"energy_scale", file.energy_scale},
                     {"fit", file.fit_meta}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write energy model '" + path + "'");
    out << j.dump(2) << '\n';
}

EnergyModelFile read_energy_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open energy model '" + path + "'");
    try {
        const auto j = nlohmann::json::parse(in);
        if (j.at("format_version").get<int>() != kEnergyModelFormatVersion) {
            throw IoError("'" + path + "': unsupported energy model format version");
        }
        EnergyModelFile f;
        f.model.a0 = j.at("a0").get<double>();
        f.model.a = j.at("a").get<std::vector<double>>();
        if (j.at("num_layers").get<std::size_t>() != f.model.a.size()) throw IoError("'" + path + "': num_layers mismatch");
        f.feature_scale = j.value("feature_scale", std::vector<double>{});
        f.energy_scale = j.value("energy_scale", 1.0);
        f.fit_meta = j.value("fit", nlohmann::json::object());
        if (f.model.a0 < 0.0) throw IoError("'" + path + "': negative coefficient");
        for (double a : f.model.a) {
            if (a < 0.0) throw IoError("'" + path + "': negative coefficient");
        }
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path + "': " + e.what());
    }
}

nlohmann::json make_exchange(const Architecture& arch, const SparsityVector& s, std::uint64_t trial_seed) {
    std::vector<long long> ints;
    for (double v : s.layers) ints.push_back(static_cast<long long>(std::floor(v)));
    return {{"format_version", kExchangeFormatVersion},
            {"architecture", architecture_to_json(arch)},
            {"pruned_architecture", architecture_to_json(pruned_architecture(arch, s))},
            {"s", ints},
            {"n_out", s.n_out},
            {"trial_seed", trial_seed}};
}

ExchangeRequest parse_exchange(const nlohmann::json& j) {
    try {
        if (j.at("format_version").get<int>() != kExchangeFormatVersion) {
            throw IoError("unsupported exchange format version");
        }
        ExchangeRequest r;
        r.arch = architecture_from_json(j.at("architecture"));
        for (long long v : j.at("s").get<std::vector<long long>>()) r.s.layers.push_back(static_cast<double>(v));
        r.s.n_out = j.at("n_out").get<std::size_t>();
        r.trial_seed = j.at("trial_seed").get<std::uint64_t>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed exchange request: ") + e.what());
    }
}

ExchangeRequest read_exchange(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open exchange file '" + path + "'");
    try {
        return parse_exchange(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError("'" + path + "': " + e.what());
    }
}

}  // namespace ecc
