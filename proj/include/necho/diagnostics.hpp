#pragma once

#include <functional>
#include <string>

namespace necho {

using WarningHandler = std::function<void(const std::string&)>;

/// Non-fatal diagnostics. The default handler writes to stderr; pass an
/// empty handler to restore it. Returns the previous handler.
WarningHandler set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

}  // namespace necho
