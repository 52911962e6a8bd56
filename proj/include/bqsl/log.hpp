#pragma once

#include <functional>
#include <string_view>

namespace bqsl {

using WarningSink = std::function<void(std::string_view)>;

// Default sink prints "bqsl: warning: ..." to stderr. Returns the previous sink.
WarningSink set_warning_sink(WarningSink sink);
void warn(std::string_view message);

}  // namespace bqsl
