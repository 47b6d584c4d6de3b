#ifndef UHMOM_SHA256_HPP
#define UHMOM_SHA256_HPP

#include <string>

namespace uhm {

// SHA-256 of a byte string, returned as 64 lowercase hex characters. Used to
// stamp report manifests with a content hash.
std::string sha256_hex(const std::string& data);

}  // namespace uhm

#endif
