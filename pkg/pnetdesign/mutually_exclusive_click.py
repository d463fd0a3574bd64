from typing import Iterable

from click import Option, UsageError


class MutuallyExclusiveOption(Option):
    """
    Click option refusing to be combined with the options named in
    ``mutually_exclusive`` (parameter names, e.g. ``no_cuts``).
    """

    def __init__(self, *args, mutually_exclusive: Iterable[str] = (), **kwargs):
        self.mutually_exclusive = frozenset(mutually_exclusive)
        if self.mutually_exclusive:
            others = ', '.join('--' + name.replace('_', '-') for name in sorted(self.mutually_exclusive))
            kwargs['help'] = f"{kwargs.get('help', '')} Cannot be used with {others}.".strip()
        super().__init__(*args, **kwargs)

    def handle_parse_result(self, ctx, opts, args):
        if self.name in opts:
            clashes = sorted(self.mutually_exclusive.intersection(opts))
            if clashes:
                raise UsageError(
                    f"--{self.name.replace('_', '-')} cannot be combined with "
                    f"{', '.join('--' + name.replace('_', '-') for name in clashes)}", ctx=ctx)
        return super().handle_parse_result(ctx, opts, args)
