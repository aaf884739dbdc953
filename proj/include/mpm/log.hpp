#pragma once

#include <functional>
#include <string>
#include <vector>

namespace mpm {

using WarningSink = std::function<void(const std::string&)>;

void warn(const std::string& message);

// Returns the previous sink. An empty sink restores stderr output.
WarningSink set_warning_sink(WarningSink sink);

class ScopedWarningCapture {
 public:
  ScopedWarningCapture();
  ~ScopedWarningCapture();
  ScopedWarningCapture(const ScopedWarningCapture&) = delete;
  ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::vector<std::string> messages_;
  WarningSink previous_;
};

}  // namespace mpm
