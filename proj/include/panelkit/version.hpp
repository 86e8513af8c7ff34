#ifndef PANELKIT_VERSION_HPP
#define PANELKIT_VERSION_HPP

namespace panelkit {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kManifestFormatVersion = 1;

} // namespace panelkit

#endif
