#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "ecc/energy.hpp"
#include "ecc/network.hpp"

namespace ecc {

inline constexpr int kProfileFormatVersion = 1;
inline constexpr int kEnergyModelFormatVersion = 1;
inline constexpr int kExchangeFormatVersion = 1;

/// Profile table, tab separated:
///   # ecc-profile format_version=1 key=value ...      (metadata line)
///   s1  s2  ...  sU  s_out  energy  trials  stdev     (column header)
///   one row per sample, reals printed with 17 significant digits.
struct Profile {
    std::map<std::string, std::string> meta;
    std::size_t num_layers = 0;
    std::vector<EnergySample> samples;
};

std::string profile_header(const std::map<std::string, std::string>& meta, std::size_t num_layers);
std::string profile_row(const EnergySample& sample);
void write_profile(const std::string& path, const Profile& profile);
/// With drop_torn_tail, a final row lacking its newline (an interrupted write) is ignored.
Profile read_profile(const std::string& path, bool drop_torn_tail = false);

/// Fitted model file (JSON): format_version, num_layers, a0, a, feature_scale, energy_scale, fit{...}.
struct EnergyModelFile {
    BilinearEnergyModel model;
    std::vector<double> feature_scale;
    double energy_scale = 1.0;
    nlohmann::json fit_meta = nlohmann::json::object();
};

void write_energy_model(const std::string& path, const EnergyModelFile& file);
EnergyModelFile read_energy_model(const std::string& path);

/// Request handed to an external measurement command (JSON):
///   {format_version, architecture, pruned_architecture, s: [ints], n_out, trial_seed}
nlohmann::json make_exchange(const Architecture& arch, const SparsityVector& s, std::uint64_t trial_seed);

struct ExchangeRequest {
    Architecture arch;
    SparsityVector s;
    std::uint64_t trial_seed = 0;
};

ExchangeRequest parse_exchange(const nlohmann::json& j);
ExchangeRequest read_exchange(const std::string& path);

/// Shortest round-trip representation of a double.
std::string format_real(double v);

}  // namespace ecc
