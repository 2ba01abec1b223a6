#pragma once

// JSON experiment configs: system sources and the matrix exchange format.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "kpp/continuum.hpp"
#include "kpp/spectral.hpp"

namespace kpp {

using Json = nlohmann::json;

/// A system read from a config, plus the trait discretization when it came
/// from a continuum source.
struct LoadedSystem {
    SystemSpec spec;
    std::string source;  ///< "inline", "generator", "n2", "random" or "continuum"
    bool stochastic = false;
    std::optional<DiscretizedSystem> discretized;
};

/// Accepted shapes, all under one object:
///   {"D": [...], "M": [[...]], "C": [[...]]}        inline rows ("n" optional, checked)
///   "M": {"laplacian": {"sigmas": [...], "boundary": "periodic"|"neumann"}}
///   "C": {"circulant": {"phi": [...]}}              generators may replace either matrix
///   {"n2": {"gamma": g, "sigma": s, "d": [d1, d2]}}
///   {"random": {"n": N, "unit_diffusion": bool}}    needs a seed
///   {"continuum": {...}}                            see parse_continuum
/// D defaults to ones. Relative kernel CSV paths resolve against `base`.
/// Throws MalformedInput on anything else.
LoadedSystem parse_system(const Json& j, std::optional<std::uint64_t> seed, const std::filesystem::path& base = {});

/// {"preset": "cane_toads", "theta_lo", "theta_hi", "alpha"} or an explicit
/// {"theta_lo", "theta_hi", "d", "sigma", "m", "k"} where d and sigma are
/// numbers and m, k are numbers or {"csv": path}. "n_bins" and "normalize"
/// are read by the caller.
ContinuumSpec parse_continuum(const Json& j, const std::filesystem::path& base = {});

/// {"n", "D", "M", "C"}; doubles are written in shortest round-trip form.
Json system_to_json(const SystemSpec& spec);

/// Reads and parses a JSON file; MalformedInput on I/O or syntax errors.
Json load_json_file(const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace kpp
