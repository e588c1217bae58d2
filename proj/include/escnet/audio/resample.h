#pragma once

#include "escnet/audio/clip.h"

namespace escnet::audio {

// Band-limited rate conversion with a windowed-sinc polyphase filter.
// Returns the clip unchanged (bit-exact) when the rates already agree.
// Output length is round(len * target / source).
AudioClip resample(const AudioClip& clip, int target_rate);

} // namespace escnet::audio
