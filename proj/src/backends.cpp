#include "deepsearch/backends.hpp"

#include <algorithm>

namespace deepsearch {

std::size_t turn_index(std::span<const ChatMessage> messages) {
    return static_cast<std::size_t>(
        std::count_if(messages.begin(), messages.end(), [](const ChatMessage& m) { return m.role == "assistant"; }));
}

} // namespace deepsearch
