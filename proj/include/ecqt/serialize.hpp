#ifndef ECQT_SERIALIZE_HPP
#define ECQT_SERIALIZE_HPP

#include <string>

#include <json.hpp>

#include "ecqt/qstate.hpp"

namespace ecqt {

// Complex matrices serialize as rows of [re, im] pairs.
nlohmann::json matrix_to_json(const Mat& m);
Mat matrix_from_json(const nlohmann::json& j);

// History container: header (dim, dt, t0, count, purity flag) followed by
// one row per grid point, interleaved (re, im) doubles. Pure rows hold the
// state vector (dim pairs), mixed rows the density matrix (dim^2 pairs,
// row-major).
void history_save_binary(const StateHistory& h, const std::string& path);
StateHistory history_load_binary(const std::string& path);

nlohmann::json history_to_json(const StateHistory& h);
StateHistory history_from_json(const nlohmann::json& j);

// Stable FNV-1a 64-bit digest of a byte string; used for reproducibility
// checks on emitted files.
std::string fnv1a_hex(const std::string& bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

// Doubles formatted with up to 17 significant digits round-trip exactly;
// all CSV/JSON emitters use this so reruns are byte-stable.
std::string format_real(Real x);

}  // namespace ecqt

#endif
