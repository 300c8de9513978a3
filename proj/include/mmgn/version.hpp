#pragma once

#define MMGN_VERSION "0.1.0"
