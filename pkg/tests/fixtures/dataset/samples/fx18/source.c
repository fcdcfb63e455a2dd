void name_copy_bounded(char *dst, char *src, unsigned cap)
{
    if (cap == 0)
        return;
    strncpy(dst, src, cap - 1);
    dst[cap - 1] = 0;
}
