#pragma once

// Umbrella header for the retrieval-augmented commit-message toolkit.

#include "reactcmg/augment.hpp"
#include "reactcmg/corpus.hpp"
#include "reactcmg/embed.hpp"
#include "reactcmg/errors.hpp"
#include "reactcmg/generate.hpp"
#include "reactcmg/harness.hpp"
#include "reactcmg/hash.hpp"
#include "reactcmg/metrics.hpp"
#include "reactcmg/retriever.hpp"
#include "reactcmg/text.hpp"
#include "reactcmg/version.hpp"
