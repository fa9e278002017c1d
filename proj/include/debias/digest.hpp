#pragma once

#include <string>
#include <string_view>

namespace debias {

// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

// First 16 hex characters of sha256_hex; used for provenance tags.
std::string short_digest(std::string_view bytes);

}  // namespace debias
